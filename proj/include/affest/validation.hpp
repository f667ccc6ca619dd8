#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "affest/estimator.hpp"

// Independent checks on a built estimator: Monte Carlo coverage of the
// certified interval, a brute-force grid oracle for the optimal value, a
// finite-difference audit of every analytic gradient, and structural
// consistency checks. The Monte Carlo and grid kernels are data-parallel
// (OpenMP); each keeps a serial reference implementation that must produce
// bit-identical results, which the test suite and the benchmark enforce.

namespace affest {

struct ProbeResult {
    Vector state;            // the true x used for this probe
    std::int64_t n_samples = 0;
    std::int64_t misses = 0; // draws with |ghat - g.x| > risk
    double miss_rate = 0.0;
    double mc_half_width = 0.0;  // 3 sqrt(eps(1-eps)/n), binomial 3-sigma slack
};

struct CoverageReport {
    std::vector<ProbeResult> probes;
    double epsilon = 0.0;
    bool pass = false;  // every probe has miss_rate <= epsilon + mc_half_width
    std::uint64_t seed = 0;
    int workers = 0;
    std::int64_t n_samples = 0;
};

// Simulate n_samples observation sets at each probe state and count how
// often the certified interval misses the truth. Deterministic for fixed
// (seed, workers): sample s of probe i uses the stream
// i * workers + (s mod workers), so the worker decomposition never changes
// the draws, and per-worker miss counts merge by integer summation.
// coverage_mc runs the workers under OpenMP; coverage_mc_serial is the
// reference implementation with identical output. Throws if a probe lies
// outside the feasible set.
CoverageReport coverage_mc(const ProblemSpec& spec, const AffineEstimator& est,
                           const std::vector<Vector>& probes, std::int64_t n_samples,
                           std::uint64_t seed, int workers = 8);
CoverageReport coverage_mc_serial(const ProblemSpec& spec, const AffineEstimator& est,
                                  const std::vector<Vector>& probes,
                                  std::int64_t n_samples, std::uint64_t seed,
                                  int workers = 8);

nlohmann::json coverage_to_json(const CoverageReport& report);

// Default probe set: x*, y*, then n_random seeded random states.
std::vector<Vector> default_probes(const ProblemSpec& spec, const AffineEstimator& est,
                                   int n_random, std::uint64_t seed);

// Brute-force evaluation of the constrained form of the optimal value:
//
//   max g.(x - y)  subject to  sum_l R_l ln affinity_l(A_l(x), A_l(y)) >= -r
//
// over a grid on X x X (grid_points per intrinsic coordinate), entirely
// independent of the saddle solver. Agreement of this value with
// Psi(alpha*) validates the whole optimization path. Cost is quadratic in
// the grid size; a std::domain_error is raised when the pair count would
// exceed the built-in budget (use fewer points or a smaller problem).
// OpenMP-parallel over grid rows; _serial is the bit-identical reference.
double dual_value_oracle(const ProblemSpec& spec, double r, int grid_points);
double dual_value_oracle_serial(const ProblemSpec& spec, double r, int grid_points);

// Worst relative error between every analytic gradient (affinity, tilted
// integral, coupled objective) and central finite differences with the
// given step, over n_points seeded random interior evaluation points per
// gradient. Relative error of a vector pair is |num - ana|_inf scaled by
// max(1, |ana|_inf).
double finite_diff_suite(const ProblemSpec& spec, int n_points, std::uint64_t seed,
                         double step = 1e-6);

struct CheckResult {
    std::string name;
    bool pass = false;
    double residual = 0.0;
    std::string detail;
};

// Structural consistency of a built estimator against its spec:
//   - per channel, T(mu*; mu*, nu*) equals the affinity (and symmetrically)
//   - risk agrees with psi_upper/2 up to certification slack
//   - risk >= alpha ln(2/epsilon) and risk >= |g.x* - g.y*| / 2
//   - certified and closed-form constants agree up to certification slack
//   - channel parameters lie strictly inside their domains
std::vector<CheckResult> consistency_suite(const ProblemSpec& spec,
                                           const AffineEstimator& est);

}  // namespace affest
