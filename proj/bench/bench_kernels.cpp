// Benchmark of the two data-parallel kernels against their serial reference
// implementations. Besides timing, it verifies that the parallel results are
// exactly equal to the serial ones — the decomposition is part of the
// deterministic contract, not an approximation.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "affest/estimator.hpp"
#include "affest/validation.hpp"

using namespace affest;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ProblemSpec load(const char* name) {
    return parse_problem(slurp(std::string(AFFEST_DATA_DIR) + "/" + name));
}

template <class F>
double time_ms(const F& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace

int main() {
    std::printf("OpenMP max threads: %d\n\n", omp_get_max_threads());
    bool ok = true;

    {  // Monte Carlo coverage kernel
        const ProblemSpec spec = load("two_channel.json");
        const AffineEstimator est = build(spec, minimize_alpha(spec));
        const auto probes = default_probes(spec, est, 3, 1);
        const std::int64_t n = 200000;
        const int workers = 8;

        CoverageReport par, ser;
        (void)coverage_mc(spec, est, probes, 1000, 1, workers);  // warm-up
        const double t_par = time_ms([&] { par = coverage_mc(spec, est, probes, n, 1, workers); });
        const double t_ser =
            time_ms([&] { ser = coverage_mc_serial(spec, est, probes, n, 1, workers); });

        bool equal = par.probes.size() == ser.probes.size();
        for (std::size_t i = 0; equal && i < par.probes.size(); ++i)
            equal = par.probes[i].misses == ser.probes[i].misses;
        ok = ok && equal;
        std::printf("coverage_mc        %5zu probes x %ld samples\n", probes.size(), (long)n);
        std::printf("  parallel  %9.2f ms\n", t_par);
        std::printf("  serial    %9.2f ms\n", t_ser);
        std::printf("  speedup   %9.2fx   results %s\n\n", t_ser / t_par,
                    equal ? "identical" : "DIFFER (BUG)");
    }

    {  // grid oracle kernel
        ProblemSpec spec = load("two_point.json");
        spec.channels[0].repetitions = 100;
        const double r = spec.r();
        const int grid = 4001;

        double par = 0.0, ser = 0.0;
        (void)dual_value_oracle(spec, r, 501);  // warm-up
        const double t_par = time_ms([&] { par = dual_value_oracle(spec, r, grid); });
        const double t_ser = time_ms([&] { ser = dual_value_oracle_serial(spec, r, grid); });

        const bool equal = par == ser;
        ok = ok && equal;
        std::printf("dual_value_oracle  %d grid points (%.1e pairs)\n", grid,
                    double(grid) * double(grid));
        std::printf("  parallel  %9.2f ms   value %.12g\n", t_par, par);
        std::printf("  serial    %9.2f ms   value %.12g\n", t_ser, ser);
        std::printf("  speedup   %9.2fx   results %s\n", t_ser / t_par,
                    equal ? "identical" : "DIFFER (BUG)");
    }

    return ok ? 0 : 1;
}
