#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "affest/validation.hpp"

using namespace affest;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ProblemSpec load(const char* name) {
    return parse_problem(slurp(std::string(AFFEST_DATA_DIR) + "/" + name));
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<int>(v.size()));
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

AffineEstimator solve(const ProblemSpec& spec) { return build(spec, minimize_alpha(spec)); }

}  // namespace

TEST_CASE("singleton coverage is exact: the interval never misses") {
    const ProblemSpec spec = load("singleton.json");
    const AffineEstimator est = solve(spec);
    const auto probes = default_probes(spec, est, 1, 7);
    const CoverageReport rep = coverage_mc(spec, est, probes, 20000, 7);
    CHECK(rep.pass);
    for (const auto& p : rep.probes) {
        CHECK(p.misses == 0);
        CHECK(p.n_samples == 20000);
    }
}

TEST_CASE("parallel and serial coverage agree exactly") {
    const ProblemSpec spec = load("two_channel.json");
    const AffineEstimator est = solve(spec);
    const auto probes = default_probes(spec, est, 3, 123);
    const CoverageReport par = coverage_mc(spec, est, probes, 20000, 123, 8);
    const CoverageReport ser = coverage_mc_serial(spec, est, probes, 20000, 123, 8);
    REQUIRE(par.probes.size() == ser.probes.size());
    for (std::size_t i = 0; i < par.probes.size(); ++i) {
        CHECK(par.probes[i].misses == ser.probes[i].misses);  // integer-exact
        CHECK(par.probes[i].miss_rate == ser.probes[i].miss_rate);
    }
    CHECK(par.pass == ser.pass);
    CHECK(coverage_to_json(par).dump() == coverage_to_json(ser).dump());

    // changing the worker count must not change the draws either
    const CoverageReport w1 = coverage_mc(spec, est, probes, 20000, 123, 1);
    REQUIRE(w1.probes.size() == par.probes.size());
    // NOTE: the stream layout fixes draws per (probe, worker-slot) with
    // workers part of the layout, so equality across worker counts is NOT
    // expected; determinism is per (seed, workers) pair.
    const CoverageReport w1b = coverage_mc(spec, est, probes, 20000, 123, 1);
    for (std::size_t i = 0; i < w1.probes.size(); ++i)
        CHECK(w1.probes[i].misses == w1b.probes[i].misses);
}

TEST_CASE("coverage holds on the stochastic examples") {
    for (const char* name : {"two_point.json", "gaussian_mean.json"}) {
        const ProblemSpec spec = load(name);
        const AffineEstimator est = solve(spec);
        const auto probes = default_probes(spec, est, 3, 2026);
        const CoverageReport rep = coverage_mc(spec, est, probes, 50000, 2026);
        CHECK(rep.pass);
        for (const auto& p : rep.probes)
            CHECK(p.miss_rate <= spec.epsilon + p.mc_half_width);
    }
}

TEST_CASE("a deliberately shrunk interval is caught by the Monte Carlo check") {
    // negative control: the test must be able to fail when the risk is wrong
    const ProblemSpec spec = load("gaussian_mean.json");
    AffineEstimator est = solve(spec);
    const auto probes = default_probes(spec, est, 2, 5);
    bool caught = false;
    for (int k = 0; k < 8 && !caught; ++k) {
        est.risk *= 0.5;
        const CoverageReport rep = coverage_mc(spec, est, probes, 20000, 5);
        caught = !rep.pass;
    }
    CHECK(caught);
}

TEST_CASE("out-of-set probes are rejected") {
    const ProblemSpec spec = load("gaussian_mean.json");
    const AffineEstimator est = solve(spec);
    CHECK_THROWS_AS((void)coverage_mc(spec, est, {vec({2.0})}, 100, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)coverage_mc(spec, est, {}, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)coverage_mc(spec, est, {vec({0.0})}, 0, 1), std::invalid_argument);
}

TEST_CASE("dual value oracle: edge cases and parallel/serial equality") {
    const ProblemSpec spec = load("two_point.json");
    // r ~ 0 forces x = y (the affinity constraint becomes an equality), so
    // only zero-value diagonal pairs qualify
    CHECK(dual_value_oracle(spec, 1e-9, 801) == 0.0);
    // looser constraint -> larger value; for r >= -2 ln 0.8 the whole segment
    // pair qualifies and the value saturates at g.(v1 - v0) = 0.6
    const double tight = dual_value_oracle(spec, 0.05, 801);
    const double loose = dual_value_oracle(spec, 0.5, 801);
    CHECK(tight <= loose + 1e-12);
    CHECK(loose <= 0.6 + 1e-12);
    CHECK(dual_value_oracle(spec, 10.0, 801) == doctest::Approx(0.6).epsilon(1e-12));

    // bit-identical serial reference
    for (const char* name : {"two_point.json", "two_channel.json"}) {
        const ProblemSpec s = load(name);
        const double a = dual_value_oracle(s, s.r(), 201);
        const double b = dual_value_oracle_serial(s, s.r(), 201);
        CHECK(a == b);
    }

    // the pair budget refuses absurd grids instead of hanging
    CHECK_THROWS_AS((void)dual_value_oracle(load("gaussian_mean.json"), 1.0, 30001),
                    std::domain_error);
}

TEST_CASE("dual value oracle brackets the solved saddle value") {
    // the oracle maximizes over a grid restricted to the feasible region, so
    // it lower-bounds the true optimum; with a fine grid it gets within 1e-3
    ProblemSpec spec = load("two_point.json");
    for (const int reps : {10, 100}) {
        spec.channels[0].repetitions = reps;
        const SaddleSolution sol = minimize_alpha(spec);
        const double oracle = dual_value_oracle(spec, sol.r, 4001);
        CHECK(oracle <= sol.psi_upper + 1e-9);
        CHECK(std::abs(sol.psi_upper - oracle) <= 1e-3);
    }
}

TEST_CASE("finite differences confirm every analytic gradient") {
    for (const char* name :
         {"two_point.json", "poisson_rate.json", "gaussian_mean.json", "two_channel.json"}) {
        const double worst = finite_diff_suite(load(name), 100, 7);
        CAPTURE(name);
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("finite-difference error shrinks quadratically with the step") {
    // central differences: halving the step should cut the error ~4x.
    // Use a coarse step so truncation (not roundoff) dominates.
    const ProblemSpec spec = load("poisson_rate.json");
    const double e1 = finite_diff_suite(spec, 60, 11, 1e-2);
    const double e2 = finite_diff_suite(spec, 60, 11, 5e-3);
    CHECK(e2 <= 0.45 * e1);
    CHECK(e2 >= 0.10 * e1);  // and not collapsing to noise
}

TEST_CASE("consistency suite passes on all shipped examples") {
    for (const char* name : {"two_point.json", "poisson_rate.json", "gaussian_mean.json",
                             "two_channel.json", "singleton.json"}) {
        const ProblemSpec spec = load(name);
        const AffineEstimator est = solve(spec);
        const auto checks = consistency_suite(spec, est);
        CHECK(checks.size() >= 6);
        for (const auto& c : checks) {
            CAPTURE(name);
            CAPTURE(c.name);
            CAPTURE(c.detail);
            CHECK(c.pass);
        }
    }
}

TEST_CASE("consistency suite flags a corrupted estimator") {
    const ProblemSpec spec = load("two_channel.json");
    AffineEstimator est = solve(spec);
    // push one channel's nu* off the solution: it no longer reproduces the
    // channel map at the stored saddle states
    est.channels[1].nu_star[0] += 0.2;
    const auto checks = consistency_suite(spec, est);
    bool reconstruction_fail = false;
    for (const auto& c : checks)
        if (c.name == "channels_match_saddle_states") reconstruction_fail = !c.pass;
    CHECK(reconstruction_fail);

    AffineEstimator est2 = solve(spec);
    est2.risk = 0.5 * est2.alpha * std::log(2.0 / est2.epsilon);  // below the hard floor
    const auto checks2 = consistency_suite(spec, est2);
    bool floor_fail = false;
    for (const auto& c : checks2)
        if (c.name == "risk_floor_confidence_term") floor_fail = !c.pass;
    CHECK(floor_fail);
}

TEST_CASE("default probes start at the saddle points") {
    const ProblemSpec spec = load("two_channel.json");
    const AffineEstimator est = solve(spec);
    const auto probes = default_probes(spec, est, 4, 99);
    REQUIRE(probes.size() == 6);
    CHECK((probes[0] - est.provenance.x_star).norm() == 0.0);
    CHECK((probes[1] - est.provenance.y_star).norm() == 0.0);
    for (const auto& p : probes) CHECK(contains(spec.feasible_set, p, 1e-9));
    // deterministic
    const auto again = default_probes(spec, est, 4, 99);
    for (std::size_t i = 0; i < probes.size(); ++i) CHECK((probes[i] - again[i]).norm() == 0.0);
}
