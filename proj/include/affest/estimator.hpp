#pragma once

#include <optional>
#include <string>
#include <vector>

#include "affest/problem.hpp"
#include "affest/saddle.hpp"

// From a saddle solution (alpha*, x*, y*) the estimator of g.x is affine in
// the observation log-likelihood ratios:
//
//   ghat(omega) = c + sum_l sum_{j<R_l} (alpha*/2) [ ln p_{mu*_l}(omega_lj) - ln p_{nu*_l}(omega_lj) ]
//
// with mu*_l = A_l(x*), nu*_l = A_l(y*). The constant c and the certified
// risk come from two more concave maximizations over X ("certification"):
//
//   U = max_x  [ g.x + alpha* sum_l R_l ln T_l(A_l(x); mu*_l, nu*_l) ]
//   V = max_y  [ -g.y + alpha* sum_l R_l ln T_l(A_l(y); nu*_l, mu*_l) ]
//
// where T is the tilted integral from densities.hpp. With upper bounds
// U+, V+ (value + Frank-Wolfe gap), c = (U+ - V+)/2 and
//
//   risk = (U+ + V+)/2 + alpha* ln(2/epsilon)
//
// satisfies P( |ghat - g.x| > risk ) <= epsilon for every x in X — for any
// alpha > 0, not just the optimal one, so certification gaps only ever
// widen the interval, never invalidate it. The closed-form alternative
// c = (g.x* + g.y*)/2 is exact at an exact saddle; its certified risk is
// max(U+ - c, V+ + c) + alpha* ln(2/epsilon).

namespace affest {

struct EstimatorChannel {
    Family family;
    Vector mu_star;  // A_l(x*)
    Vector nu_star;  // A_l(y*)
    int repetitions = 1;
};

enum class ConstantMode { Certified, ClosedForm };

struct Certification {
    double u_value = 0.0, u_gap = 0.0, u_upper = 0.0;
    double v_value = 0.0, v_gap = 0.0, v_upper = 0.0;
    double c = 0.0;  // (u_upper - v_upper) / 2
};

// Everything needed to audit how the estimator was produced.
struct Provenance {
    double psi_lower = 0.0, psi_upper = 0.0;
    double inner_fw_gap = 0.0;
    double cert_gap_u = 0.0, cert_gap_v = 0.0;
    double delta_solver = 0.0;
    bool alpha_bound_active = false;
    bool precision_met = true;  // delta_solver <= requested delta
    Vector x_star, y_star;
    std::vector<AlphaTracePoint> trace;
    SolverConfig solver;
    std::string constant_mode;  // "certified" | "closed-form"
    double constant_certified = 0.0;
    double constant_closed_form = 0.0;
};

struct AffineEstimator {
    double alpha = 0.0;
    std::vector<EstimatorChannel> channels;
    double constant_c = 0.0;
    double risk = 0.0;     // half-width of the level-(1-epsilon) interval
    double epsilon = 0.0;
    double g_x_star = 0.0;
    double g_y_star = 0.0;
    Provenance provenance;
};

// Observed outcomes, outcomes[l][j] = j-th repetition of channel l.
struct ObservationSet {
    std::vector<std::vector<Vector>> outcomes;
};

// The two certification maximizations at the given saddle solution
// (Frank-Wolfe warm-started from x*, y*).
Certification certify(const ProblemSpec& spec, const SaddleSolution& saddle);

// Closed-form constant (g.x* + g.y*) / 2.
double simple_constant(const ProblemSpec& spec, const SaddleSolution& saddle);

// Assemble the estimator, certify it, and check the construction
// invariants (risk >= alpha ln(2/eps), risk >= |g.x* - g.y*|/2, channel
// parameters strictly inside their domains). Invariant violations signal
// an internal bug and throw std::logic_error.
AffineEstimator build(const ProblemSpec& spec, const SaddleSolution& saddle,
                      ConstantMode mode = ConstantMode::Certified);

// Apply the estimator to one observation set (validates shapes/outcomes).
double evaluate(const AffineEstimator& est, const ObservationSet& obs);

struct RiskReport {
    double risk = 0.0;
    double epsilon = 0.0;
    double alpha = 0.0;
    double constant_c = 0.0;
    double psi_lower = 0.0, psi_upper = 0.0;
    double delta_solver = 0.0;
    bool precision_met = true;
    bool alpha_bound_active = false;
    // Near-optimality factor 2 + ln(64)/ln(0.25/epsilon): the certified
    // risk exceeds the best possible risk of ANY estimation procedure by
    // at most this factor. Defined only for epsilon in (0, 0.25).
    std::optional<double> theta;
    std::string theta_note;
};

RiskReport report(const AffineEstimator& est);
std::string format_report(const RiskReport& rep);  // byte-stable text rendering

// Versioned JSON round trip. estimator_from_json rejects unknown versions.
nlohmann::json estimator_to_json(const AffineEstimator& est);
AffineEstimator estimator_from_json(const nlohmann::json& doc);

// Observation documents; validated against the estimator's channel
// structure (every channel present exactly once, repetition counts match).
ObservationSet observations_from_json(const nlohmann::json& doc,
                                      const AffineEstimator& est);
nlohmann::json observations_to_json(const ObservationSet& obs);

}  // namespace affest
