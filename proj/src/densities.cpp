#include "affest/densities.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "affest/rng.hpp"

namespace affest {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void domain_fail(const Family& family, const std::string& what) {
    throw std::domain_error(std::string(family_name(family)) + " family: " + what);
}

void check_size(const Family& family, const Vector& v, const char* label) {
    if (static_cast<int>(v.size()) != param_dim(family))
        domain_fail(family, std::string(label) + " has dimension " + std::to_string(v.size()) +
                                ", expected " + std::to_string(param_dim(family)));
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

// --- Poisson sampling ---------------------------------------------------
//
// CDF inversion is exact but needs exp(-lambda) > 0, so large rates are
// split first: a Poisson(lambda) count is the sum of independent
// Poisson(lambda / 2^k) counts by infinite divisibility.

std::int64_t poisson_inversion(double lambda, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double p = std::exp(-lambda);
    double cdf = p;
    std::int64_t k = 0;
    // Accumulated round-off can leave cdf marginally below 1, so cap the
    // walk far out in the tail.
    const std::int64_t k_max =
        static_cast<std::int64_t>(lambda + 12.0 * std::sqrt(lambda + 1.0) + 30.0);
    while (u > cdf && k < k_max) {
        ++k;
        p *= lambda / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

std::int64_t poisson_draw(double lambda, std::mt19937_64& rng) {
    std::int64_t total = 0;
    while (lambda > 400.0) {  // e^{-400} is representable; e^{-750} is not
        total += poisson_inversion(400.0, rng);
        lambda -= 400.0;
    }
    return total + poisson_inversion(lambda, rng);
}

// --- Independent affinity oracles ---------------------------------------

double discrete_affinity_oracle(const Vector& mu, const Vector& nu) {
    // Same sum as the closed form but routed through logs, so the two
    // paths share no arithmetic.
    double total = 0.0;
    for (int i = 0; i < mu.size(); ++i)
        total += std::exp(0.5 * (std::log(mu[i]) + std::log(nu[i])));
    return total;
}

double poisson_affinity_oracle_1d(double mu, double nu) {
    // sum_k sqrt(p_mu(k) p_nu(k)) truncated with a proven geometric tail
    // bound: for k >= K, term_{k+1}/term_k = sqrt(mu nu)/(k+1) < 1.
    const double log_half_sum = -0.5 * (mu + nu);
    const double sqrt_mn = std::sqrt(mu * nu);
    const std::int64_t k_max =
        static_cast<std::int64_t>(std::max(mu, nu) + 80.0 * std::sqrt(std::max(mu, nu) + 1.0) + 200.0);
    double total = 0.0;
    double log_term = log_half_sum;  // k = 0 term: exp(-(mu+nu)/2)
    for (std::int64_t k = 0;; ++k) {
        const double term = std::exp(log_term);
        total += term;
        const double ratio = sqrt_mn / static_cast<double>(k + 1);
        if (ratio < 1.0) {
            // Remaining tail <= term * ratio / (1 - ratio).
            if (term * ratio / (1.0 - ratio) < 1e-16 * total) break;
        }
        if (k >= k_max)
            throw std::runtime_error("poisson affinity oracle: series did not converge");
        log_term += std::log(sqrt_mn) - std::log(static_cast<double>(k + 1));
    }
    return total;
}

// Adaptive Simpson with explicit failure on non-convergence.
template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) throw std::runtime_error("gaussian affinity oracle: quadrature did not converge");
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

double gaussian_affinity_oracle_1d(double mu, double nu, double sigma) {
    const auto integrand = [&](double w) {
        const double za = (w - mu) / sigma;
        const double zb = (w - nu) / sigma;
        return std::exp(-0.25 * (za * za + zb * zb)) /
               (sigma * std::sqrt(2.0 * 3.14159265358979323846));
    };
    const double lo = std::min(mu, nu) - 20.0 * sigma;
    const double hi = std::max(mu, nu) + 20.0 * sigma;
    // Two passes: a rough value sets the scale, then an absolute tolerance
    // proportional to it gives ~12 correct digits regardless of magnitude.
    const double rough = adaptive_simpson(integrand, lo, hi, 1e-6);
    const double tol = std::max(rough, 1e-300) * 1e-13;
    return adaptive_simpson(integrand, lo, hi, tol);
}

}  // namespace

int param_dim(const Family& family) {
    return std::visit(overloaded{[](const Discrete& d) { return d.n_outcomes; },
                                 [](const PoissonVec& p) { return p.dim; },
                                 [](const GaussianVec& g) { return g.dim; }},
                      family);
}

const char* family_name(const Family& family) {
    return std::visit(overloaded{[](const Discrete&) { return "discrete"; },
                                 [](const PoissonVec&) { return "poisson"; },
                                 [](const GaussianVec&) { return "gaussian"; }},
                      family);
}

void check_family(const Family& family) {
    std::visit(overloaded{[](const Discrete& d) {
                              if (d.n_outcomes < 2)
                                  throw std::invalid_argument("discrete family: n_outcomes must be >= 2");
                          },
                          [](const PoissonVec& p) {
                              if (p.dim < 1)
                                  throw std::invalid_argument("poisson family: dim must be >= 1");
                          },
                          [](const GaussianVec& g) {
                              if (g.dim < 1)
                                  throw std::invalid_argument("gaussian family: dim must be >= 1");
                              if (static_cast<int>(g.sigmas.size()) != g.dim)
                                  throw std::invalid_argument("gaussian family: sigmas must have length dim");
                              for (int i = 0; i < g.sigmas.size(); ++i)
                                  if (!(g.sigmas[i] > 0.0) || !std::isfinite(g.sigmas[i]))
                                      throw std::invalid_argument(
                                          "gaussian family: sigmas must be positive and finite");
                          }},
               family);
}

void check_params(const Family& family, const Vector& mu, double margin) {
    check_size(family, mu, "parameter");
    for (int i = 0; i < mu.size(); ++i)
        if (!std::isfinite(mu[i])) domain_fail(family, "parameter has non-finite entries");
    std::visit(overloaded{[&](const Discrete&) {
                              for (int i = 0; i < mu.size(); ++i)
                                  if (!(mu[i] > 0.0) || mu[i] < margin)
                                      domain_fail(family,
                                                  "probability " + std::to_string(i) + " = " +
                                                      std::to_string(mu[i]) +
                                                      " is not strictly positive (margin " +
                                                      std::to_string(margin) + ")");
                              if (std::abs(mu.sum() - 1.0) > 1e-9)
                                  domain_fail(family, "probabilities sum to " + std::to_string(mu.sum()) +
                                                          ", expected 1");
                          },
                          [&](const PoissonVec&) {
                              for (int i = 0; i < mu.size(); ++i)
                                  if (!(mu[i] > 0.0) || mu[i] < margin)
                                      domain_fail(family, "rate " + std::to_string(i) + " = " +
                                                              std::to_string(mu[i]) +
                                                              " is not strictly positive (margin " +
                                                              std::to_string(margin) + ")");
                          },
                          [&](const GaussianVec&) {
                              // Means are unconstrained; finiteness was checked above.
                          }},
               family);
}

void check_outcome(const Family& family, const Vector& outcome) {
    std::visit(overloaded{[&](const Discrete& d) {
                              if (outcome.size() != 1)
                                  domain_fail(family, "outcome must be a single category index");
                              if (!is_integer(outcome[0]) || outcome[0] < 0.0 ||
                                  outcome[0] >= static_cast<double>(d.n_outcomes))
                                  domain_fail(family, "outcome index " + std::to_string(outcome[0]) +
                                                          " outside {0..." +
                                                          std::to_string(d.n_outcomes - 1) + "}");
                          },
                          [&](const PoissonVec& p) {
                              if (static_cast<int>(outcome.size()) != p.dim)
                                  domain_fail(family, "outcome has wrong dimension");
                              for (int i = 0; i < outcome.size(); ++i)
                                  if (!is_integer(outcome[i]) || outcome[i] < 0.0)
                                      domain_fail(family, "counts must be non-negative integers");
                          },
                          [&](const GaussianVec& g) {
                              if (static_cast<int>(outcome.size()) != g.dim)
                                  domain_fail(family, "outcome has wrong dimension");
                              for (int i = 0; i < outcome.size(); ++i)
                                  if (!std::isfinite(outcome[i]))
                                      domain_fail(family, "outcome has non-finite entries");
                          }},
               family);
}

double log_density(const Family& family, const Vector& mu, const Vector& outcome) {
    check_params(family, mu);
    check_outcome(family, outcome);
    return std::visit(
        overloaded{[&](const Discrete&) { return std::log(mu[static_cast<int>(outcome[0])]); },
                   [&](const PoissonVec&) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i)
                           total += -mu[i] + outcome[i] * std::log(mu[i]) - std::lgamma(outcome[i] + 1.0);
                       return total;
                   },
                   [&](const GaussianVec& g) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i) {
                           const double z = (outcome[i] - mu[i]) / g.sigmas[i];
                           total += -0.5 * std::log(2.0 * 3.14159265358979323846 * g.sigmas[i] *
                                                    g.sigmas[i]) -
                                    0.5 * z * z;
                       }
                       return total;
                   }},
        family);
}

double log_density_ratio(const Family& family, const Vector& mu, const Vector& nu,
                         const Vector& outcome) {
    return std::visit(
        overloaded{[&](const Discrete&) {
                       const int k = static_cast<int>(outcome[0]);
                       return std::log(mu[k] / nu[k]);
                   },
                   [&](const PoissonVec&) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i)
                           total += nu[i] - mu[i] + outcome[i] * std::log(mu[i] / nu[i]);
                       return total;
                   },
                   [&](const GaussianVec& g) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i) {
                           const double za = outcome[i] - mu[i];
                           const double zb = outcome[i] - nu[i];
                           total += (zb * zb - za * za) / (2.0 * g.sigmas[i] * g.sigmas[i]);
                       }
                       return total;
                   }},
        family);
}

double log_affinity(const Family& family, const Vector& mu, const Vector& nu) {
    check_params(family, mu);
    check_params(family, nu);
    return std::visit(
        overloaded{[&](const Discrete&) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i) total += std::sqrt(mu[i] * nu[i]);
                       return std::log(total);
                   },
                   [&](const PoissonVec&) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i) {
                           const double d = std::sqrt(mu[i]) - std::sqrt(nu[i]);
                           total -= 0.5 * d * d;
                       }
                       return total;
                   },
                   [&](const GaussianVec& g) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i) {
                           const double d = mu[i] - nu[i];
                           total -= d * d / (8.0 * g.sigmas[i] * g.sigmas[i]);
                       }
                       return total;
                   }},
        family);
}

double affinity(const Family& family, const Vector& mu, const Vector& nu) {
    return std::exp(log_affinity(family, mu, nu));
}

std::pair<Vector, Vector> log_affinity_grad(const Family& family, const Vector& mu,
                                            const Vector& nu) {
    check_params(family, mu);
    check_params(family, nu);
    return std::visit(
        overloaded{
            [&](const Discrete&) {
                double total = 0.0;
                for (int i = 0; i < mu.size(); ++i) total += std::sqrt(mu[i] * nu[i]);
                Vector gm(mu.size()), gn(mu.size());
                for (int i = 0; i < mu.size(); ++i) {
                    gm[i] = 0.5 * std::sqrt(nu[i] / mu[i]) / total;
                    gn[i] = 0.5 * std::sqrt(mu[i] / nu[i]) / total;
                }
                return std::make_pair(gm, gn);
            },
            [&](const PoissonVec&) {
                Vector gm(mu.size()), gn(mu.size());
                for (int i = 0; i < mu.size(); ++i) {
                    const double d = std::sqrt(mu[i]) - std::sqrt(nu[i]);
                    gm[i] = -0.5 * d / std::sqrt(mu[i]);
                    gn[i] = 0.5 * d / std::sqrt(nu[i]);
                }
                return std::make_pair(gm, gn);
            },
            [&](const GaussianVec& g) {
                Vector gm(mu.size()), gn(mu.size());
                for (int i = 0; i < mu.size(); ++i) {
                    const double d = mu[i] - nu[i];
                    gm[i] = -d / (4.0 * g.sigmas[i] * g.sigmas[i]);
                    gn[i] = d / (4.0 * g.sigmas[i] * g.sigmas[i]);
                }
                return std::make_pair(gm, gn);
            }},
        family);
}

double tilted_log(const Family& family, const Vector& lambda, const Vector& mu,
                  const Vector& nu) {
    check_params(family, lambda);
    check_params(family, mu);
    check_params(family, nu);
    return std::visit(
        overloaded{[&](const Discrete&) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i)
                           total += lambda[i] * std::sqrt(nu[i] / mu[i]);
                       return std::log(total);
                   },
                   [&](const PoissonVec&) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i)
                           total += lambda[i] * (std::sqrt(nu[i] / mu[i]) - 1.0) +
                                    0.5 * (mu[i] - nu[i]);
                       return total;
                   },
                   [&](const GaussianVec& g) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i) {
                           const double s2 = g.sigmas[i] * g.sigmas[i];
                           const double d = nu[i] - mu[i];
                           total += d * lambda[i] / (2.0 * s2) + d * d / (8.0 * s2) +
                                    (mu[i] * mu[i] - nu[i] * nu[i]) / (4.0 * s2);
                       }
                       return total;
                   }},
        family);
}

Vector tilted_log_grad(const Family& family, const Vector& lambda, const Vector& mu,
                       const Vector& nu) {
    check_params(family, lambda);
    check_params(family, mu);
    check_params(family, nu);
    return std::visit(
        overloaded{[&](const Discrete&) {
                       double total = 0.0;
                       for (int i = 0; i < mu.size(); ++i)
                           total += lambda[i] * std::sqrt(nu[i] / mu[i]);
                       Vector grad(mu.size());
                       for (int i = 0; i < mu.size(); ++i)
                           grad[i] = std::sqrt(nu[i] / mu[i]) / total;
                       return grad;
                   },
                   [&](const PoissonVec&) {
                       Vector grad(mu.size());
                       for (int i = 0; i < mu.size(); ++i)
                           grad[i] = std::sqrt(nu[i] / mu[i]) - 1.0;
                       return grad;
                   },
                   [&](const GaussianVec& g) {
                       Vector grad(mu.size());
                       for (int i = 0; i < mu.size(); ++i)
                           grad[i] = (nu[i] - mu[i]) / (2.0 * g.sigmas[i] * g.sigmas[i]);
                       return grad;
                   }},
        family);
}

void sample_into(const Family& family, const Vector& mu, std::mt19937_64& rng, Vector& out) {
    std::visit(overloaded{[&](const Discrete& d) {
                              out.resize(1);
                              const double u = uniform01(rng);
                              double cdf = 0.0;
                              int k = d.n_outcomes - 1;  // lands here when round-off leaves cdf < 1
                              for (int i = 0; i < d.n_outcomes; ++i) {
                                  cdf += mu[i];
                                  if (u <= cdf) {
                                      k = i;
                                      break;
                                  }
                              }
                              out[0] = static_cast<double>(k);
                          },
                          [&](const PoissonVec& p) {
                              out.resize(p.dim);
                              for (int i = 0; i < p.dim; ++i)
                                  out[i] = static_cast<double>(poisson_draw(mu[i], rng));
                          },
                          [&](const GaussianVec& g) {
                              out.resize(g.dim);
                              for (int i = 0; i < g.dim; ++i)
                                  out[i] = mu[i] + g.sigmas[i] * normal01(rng);
                          }},
               family);
}

Vector sample(const Family& family, const Vector& mu, std::mt19937_64& rng) {
    check_params(family, mu);
    Vector out;
    sample_into(family, mu, rng, out);
    return out;
}

double affinity_oracle(const Family& family, const Vector& mu, const Vector& nu) {
    check_params(family, mu);
    check_params(family, nu);
    return std::visit(overloaded{[&](const Discrete&) { return discrete_affinity_oracle(mu, nu); },
                                 [&](const PoissonVec&) {
                                     double log_total = 0.0;
                                     for (int i = 0; i < mu.size(); ++i)
                                         log_total += std::log(poisson_affinity_oracle_1d(mu[i], nu[i]));
                                     return std::exp(log_total);
                                 },
                                 [&](const GaussianVec& g) {
                                     double log_total = 0.0;
                                     for (int i = 0; i < mu.size(); ++i)
                                         log_total += std::log(
                                             gaussian_affinity_oracle_1d(mu[i], nu[i], g.sigmas[i]));
                                     return std::exp(log_total);
                                 }},
                      family);
}

}  // namespace affest
