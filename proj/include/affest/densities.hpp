#pragma once

#include <random>
#include <variant>

#include "affest/common.hpp"

// Parametric observation families. Each family fixes a dominating measure
// and exposes, besides log densities and sampling, the two quantities the
// optimizer is built on:
//
//   affinity(mu, nu)       = integral of sqrt(p_mu p_nu)
//   tilted integral        T(lambda; mu, nu) = integral of sqrt(p_nu / p_mu) p_lambda
//
// with the identity T(mu; mu, nu) = affinity(mu, nu). All three families
// admit closed forms for both quantities and their parameter gradients:
//
//   Discrete(n):      affinity = sum_i sqrt(mu_i nu_i)
//                     T = sum_i lambda_i sqrt(nu_i / mu_i)
//   PoissonVec(m):    affinity = exp(-1/2 sum_i (sqrt(mu_i) - sqrt(nu_i))^2)
//                     ln T = sum_i [ lambda_i (sqrt(nu_i/mu_i) - 1) + (mu_i - nu_i)/2 ]
//   GaussianVec(m):   affinity = exp(-sum_i (mu_i - nu_i)^2 / (8 sigma_i^2))
//                     ln T = sum_i [ (nu_i-mu_i) lambda_i / (2 sigma_i^2)
//                                    + (nu_i-mu_i)^2 / (8 sigma_i^2)
//                                    + (mu_i^2 - nu_i^2) / (4 sigma_i^2) ]
//
// An independent numerical oracle (summation / series / quadrature) is kept
// alongside the closed forms so tests can cross-check them.

namespace affest {

// Probabilities on {0, ..., n_outcomes-1}; parameter = the probability
// vector itself (strictly positive, summing to one).
struct Discrete {
    int n_outcomes = 0;
};

// Vector of independent Poisson counts; parameter = the rate vector
// (strictly positive).
struct PoissonVec {
    int dim = 0;
};

// Vector of independent Gaussians with known scales; parameter = the mean
// vector, sigmas fixed per coordinate.
struct GaussianVec {
    int dim = 0;
    Vector sigmas;
};

using Family = std::variant<Discrete, PoissonVec, GaussianVec>;

// Dimension of the parameter vector.
int param_dim(const Family& family);

// "discrete" / "poisson" / "gaussian" (matches the JSON kind tag).
const char* family_name(const Family& family);

// Validates the family description itself (positive sizes, positive
// sigmas). Throws std::invalid_argument.
void check_family(const Family& family);

// Validates a parameter vector. With margin > 0 the parameter must sit at
// least `margin` inside the domain (componentwise >= margin for discrete
// probabilities and Poisson rates; discrete vectors must additionally sum
// to one within 1e-9). Throws std::domain_error with a description.
void check_params(const Family& family, const Vector& mu, double margin = 0.0);

// Validates an observed outcome (shape, integrality, range).
// Outcomes are passed as vectors uniformly: a Discrete outcome is a
// length-1 vector holding the category index.
void check_outcome(const Family& family, const Vector& outcome);

// ln p_mu(outcome) with respect to the family's dominating measure.
double log_density(const Family& family, const Vector& mu, const Vector& outcome);

// ln p_mu(outcome) - ln p_nu(outcome). The estimator consumes only this
// difference; computing it directly drops the outcome-only terms (Poisson
// factorials, Gaussian normalizers). Performs no validation — callers are
// responsible for checking parameters and outcomes up front.
double log_density_ratio(const Family& family, const Vector& mu, const Vector& nu,
                         const Vector& outcome);

// Closed-form affinity, its logarithm, and the gradients of the logarithm
// with respect to (mu, nu). Parameters must be strictly interior.
double affinity(const Family& family, const Vector& mu, const Vector& nu);
double log_affinity(const Family& family, const Vector& mu, const Vector& nu);
std::pair<Vector, Vector> log_affinity_grad(const Family& family, const Vector& mu,
                                            const Vector& nu);

// ln T(lambda; mu, nu) and its gradient in lambda (closed forms).
double tilted_log(const Family& family, const Vector& lambda, const Vector& mu,
                  const Vector& nu);
Vector tilted_log_grad(const Family& family, const Vector& lambda, const Vector& mu,
                       const Vector& nu);

// One draw from p_mu. sample_into avoids allocation in hot loops.
Vector sample(const Family& family, const Vector& mu, std::mt19937_64& rng);
void sample_into(const Family& family, const Vector& mu, std::mt19937_64& rng,
                 Vector& out);

// Slow, independent evaluation of the affinity used to validate the closed
// forms: exact summation over outcomes (discrete), truncated series with a
// checked geometric tail bound (poisson), adaptive Simpson quadrature
// (gaussian). Throws std::runtime_error if the series/quadrature cannot
// reach its internal tolerance.
double affinity_oracle(const Family& family, const Vector& mu, const Vector& nu);

}  // namespace affest
