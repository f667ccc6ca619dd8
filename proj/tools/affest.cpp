// Command-line front end: solve a problem document into a certified affine
// estimator, apply an estimator to observations, validate coverage by Monte
// Carlo, and sweep a problem parameter into a risk table.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "affest/estimator.hpp"
#include "affest/problem.hpp"
#include "affest/validation.hpp"

namespace {

using affest::AffineEstimator;
using affest::ProblemSpec;

constexpr int kExitOk = 0;
constexpr int kExitStrict = 1;
constexpr int kExitInput = 2;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw affest::SpecError("cannot read file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw affest::SpecError("cannot write file '" + path + "'");
    out << content;
    if (!out) throw affest::SpecError("failed while writing '" + path + "'");
}

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string g12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct CommonOverrides {
    double epsilon = -1.0;
    double delta = -1.0;
    std::int64_t seed = -1;
    double tol_inner = -1.0;
    double tol_alpha = -1.0;
    bool allow_large_epsilon = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--epsilon", epsilon, "Override the problem's epsilon");
        cmd->add_option("--delta", delta, "Override the requested solver precision");
        cmd->add_option("--seed", seed, "Override the master seed");
        cmd->add_option("--tol-inner", tol_inner, "Override the inner Frank-Wolfe gap tolerance");
        cmd->add_option("--tol-alpha", tol_alpha, "Override the alpha search bracket tolerance");
        cmd->add_flag("--allow-large-epsilon", allow_large_epsilon,
                      "Accept epsilon in (0, 1) instead of (0, 0.25)");
    }

    void apply(ProblemSpec& spec) const {
        if (epsilon >= 0.0) affest::set_epsilon(spec, epsilon, allow_large_epsilon);
        if (delta >= 0.0) affest::set_delta(spec, delta);
        if (seed >= 0) spec.solver.seed = static_cast<std::uint64_t>(seed);
        if (tol_inner >= 0.0) {
            if (!(tol_inner > 0.0)) throw affest::SpecError("--tol-inner must be > 0");
            spec.solver.tol_inner = tol_inner;
        }
        if (tol_alpha >= 0.0) {
            if (!(tol_alpha > 0.0)) throw affest::SpecError("--tol-alpha must be > 0");
            spec.solver.tol_alpha = tol_alpha;
        }
    }
};

ProblemSpec load_problem(const std::string& path, const CommonOverrides& overrides) {
    ProblemSpec spec =
        affest::parse_problem(slurp(path), affest::ParseOptions{overrides.allow_large_epsilon});
    overrides.apply(spec);
    const std::vector<std::string> violations = affest::validate_problem(spec);
    if (!violations.empty()) {
        std::ostringstream os;
        os << "problem model is invalid:";
        for (const auto& v : violations) os << "\n  - " << v;
        throw affest::SpecError(os.str());
    }
    return spec;
}

void check_estimator_matches(const ProblemSpec& spec, const AffineEstimator& est) {
    if (spec.channels.size() != est.channels.size())
        throw affest::SpecError("estimator has " + std::to_string(est.channels.size()) +
                                " channels, problem has " + std::to_string(spec.channels.size()));
    for (std::size_t l = 0; l < spec.channels.size(); ++l) {
        if (affest::family_to_json(spec.channels[l].family) !=
            affest::family_to_json(est.channels[l].family))
            throw affest::SpecError("estimator channel " + std::to_string(l) +
                                    " family does not match the problem");
        if (spec.channels[l].repetitions != est.channels[l].repetitions)
            throw affest::SpecError("estimator channel " + std::to_string(l) +
                                    " repetition count does not match the problem");
    }
}

int run_solve(const std::string& problem_path, const std::string& out_path,
              const CommonOverrides& overrides, const std::string& constant_mode, bool strict) {
    ProblemSpec spec = load_problem(problem_path, overrides);
    const affest::SaddleSolution saddle = affest::minimize_alpha(spec);
    const affest::ConstantMode mode = constant_mode == "closed-form"
                                          ? affest::ConstantMode::ClosedForm
                                          : affest::ConstantMode::Certified;
    const AffineEstimator est = affest::build(spec, saddle, mode);

    write_file(out_path, affest::estimator_to_json(est).dump(2) + "\n");
    std::cout << affest::format_report(affest::report(est));
    std::cout << "estimator written to   : " << out_path << "\n";

    if (!est.provenance.precision_met) {
        std::cerr << "warning: solver precision " << g12(est.provenance.delta_solver)
                  << " exceeds the requested delta " << g12(spec.delta) << "\n";
        if (strict) return kExitStrict;
    }
    return kExitOk;
}

int run_estimate(const std::string& estimator_path, const std::string& obs_path) {
    const AffineEstimator est =
        affest::estimator_from_json(nlohmann::json::parse(slurp(estimator_path)));
    const affest::ObservationSet obs =
        affest::observations_from_json(nlohmann::json::parse(slurp(obs_path)), est);
    const double value = affest::evaluate(est, obs);
    std::cout << "estimate = " << g12(value) << "\n";
    std::cout << "interval = [" << g12(value - est.risk) << ", " << g12(value + est.risk)
              << "]  (misses the true value with probability <= " << g12(est.epsilon) << ")\n";
    return kExitOk;
}

int run_validate(const std::string& problem_path, const std::string& estimator_path,
                 const std::string& out_path, const CommonOverrides& overrides,
                 std::int64_t n_samples, int n_random_probes, int workers, bool serial,
                 bool strict) {
    ProblemSpec spec = load_problem(problem_path, overrides);
    const AffineEstimator est =
        affest::estimator_from_json(nlohmann::json::parse(slurp(estimator_path)));
    check_estimator_matches(spec, est);

    const std::uint64_t seed = spec.solver.seed;
    const std::vector<affest::Vector> probes =
        affest::default_probes(spec, est, n_random_probes, seed);
    const affest::CoverageReport report =
        serial ? affest::coverage_mc_serial(spec, est, probes, n_samples, seed, workers)
               : affest::coverage_mc(spec, est, probes, n_samples, seed, workers);

    for (std::size_t i = 0; i < report.probes.size(); ++i) {
        const auto& pr = report.probes[i];
        const bool ok = pr.miss_rate <= report.epsilon + pr.mc_half_width;
        std::cout << "probe " << i << ": miss_rate = " << g12(pr.miss_rate) << "  (misses "
                  << pr.misses << "/" << pr.n_samples << ", threshold "
                  << g12(report.epsilon + pr.mc_half_width) << ")  [" << (ok ? "ok" : "MISS RATE TOO HIGH")
                  << "]\n";
    }
    std::cout << "coverage: " << (report.pass ? "PASS" : "FAIL") << "  (epsilon = "
              << g12(report.epsilon) << ", n = " << report.n_samples << ", seed = " << report.seed
              << ", workers = " << report.workers << ")\n";
    write_file(out_path, affest::coverage_to_json(report).dump(2) + "\n");
    std::cout << "coverage report written to: " << out_path << "\n";

    if (!report.pass) {
        std::cerr << "warning: measured miss rate exceeds epsilon plus Monte Carlo slack\n";
        if (strict) return kExitStrict;
    }
    return kExitOk;
}

int run_sweep(const std::string& problem_path, const CommonOverrides& overrides,
              const std::string& vary, const std::vector<double>& values,
              const std::string& out_path, const std::string& constant_mode) {
    if (values.empty()) throw affest::SpecError("--values must list at least one value");
    const affest::ConstantMode mode = constant_mode == "closed-form"
                                          ? affest::ConstantMode::ClosedForm
                                          : affest::ConstantMode::Certified;
    std::ostringstream csv;
    csv << "value,risk,alpha_star,psi_upper,psi_lower\n";
    for (const double value : values) {
        ProblemSpec spec = load_problem(problem_path, overrides);
        if (vary == "epsilon") {
            affest::set_epsilon(spec, value, overrides.allow_large_epsilon);
        } else {  // repetitions
            if (value < 1.0 || value != static_cast<double>(static_cast<int>(value)))
                throw affest::SpecError("--values for repetitions must be positive integers");
            for (auto& ch : spec.channels) ch.repetitions = static_cast<int>(value);
        }
        const affest::SaddleSolution saddle = affest::minimize_alpha(spec);
        const AffineEstimator est = affest::build(spec, saddle, mode);
        csv << g17(value) << "," << g17(est.risk) << "," << g17(est.alpha) << ","
            << g17(est.provenance.psi_upper) << "," << g17(est.provenance.psi_lower) << "\n";
    }
    if (out_path.empty())
        std::cout << csv.str();
    else {
        write_file(out_path, csv.str());
        std::cout << "sweep written to: " << out_path << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nearly optimal affine estimators of linear functionals from indirect\n"
                 "observations, with certified confidence intervals."};
    app.require_subcommand(1);

    // solve
    auto* solve = app.add_subcommand("solve", "Construct and certify an estimator");
    std::string solve_problem, solve_out = "estimator.json", solve_mode = "certified";
    bool solve_strict = false;
    CommonOverrides solve_overrides;
    solve->add_option("problem", solve_problem, "Problem document (JSON)")->required();
    solve->add_option("-o,--output", solve_out, "Estimator output path");
    solve->add_option("--constant-mode", solve_mode, "Constant construction")
        ->check(CLI::IsMember({"certified", "closed-form"}));
    solve->add_flag("--strict", solve_strict, "Exit 1 if the requested precision is not met");
    solve_overrides.add_to(solve);

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Apply an estimator to observations");
    std::string est_estimator, est_obs;
    estimate->add_option("estimator", est_estimator, "Estimator document (JSON)")->required();
    estimate->add_option("observations", est_obs, "Observations document (JSON)")->required();

    // validate
    auto* validate = app.add_subcommand("validate", "Monte Carlo coverage check of an estimator");
    std::string val_problem, val_estimator, val_out = "coverage.json";
    std::int64_t val_samples = 200000;
    int val_probes = 5, val_workers = 8;
    bool val_serial = false, val_strict = false;
    CommonOverrides val_overrides;
    validate->add_option("problem", val_problem, "Problem document (JSON)")->required();
    validate->add_option("estimator", val_estimator, "Estimator document (JSON)")->required();
    validate->add_option("-o,--output", val_out, "Coverage report output path");
    validate->add_option("--n-samples", val_samples, "Samples per probe state");
    validate->add_option("--probes", val_probes, "Number of random probe states (x*, y* always included)");
    validate->add_option("--workers", val_workers, "Logical sampling streams (fixed decomposition)");
    validate->add_flag("--serial", val_serial, "Use the serial reference kernel");
    validate->add_flag("--strict", val_strict, "Exit 1 if coverage fails");
    val_overrides.add_to(validate);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Risk table over a varied problem parameter");
    std::string sweep_problem, sweep_vary, sweep_out, sweep_mode = "certified";
    std::vector<double> sweep_values;
    CommonOverrides sweep_overrides;
    sweep->add_option("problem", sweep_problem, "Problem document (JSON)")->required();
    sweep->add_option("--vary", sweep_vary, "Which parameter to vary")
        ->required()
        ->check(CLI::IsMember({"epsilon", "repetitions"}));
    sweep->add_option("--values", sweep_values, "Values to sweep over")->required()->delimiter(',');
    sweep->add_option("-o,--output", sweep_out, "CSV output path (stdout when omitted)");
    sweep->add_option("--constant-mode", sweep_mode, "Constant construction")
        ->check(CLI::IsMember({"certified", "closed-form"}));
    sweep_overrides.add_to(sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed())
            return run_solve(solve_problem, solve_out, solve_overrides, solve_mode, solve_strict);
        if (estimate->parsed()) return run_estimate(est_estimator, est_obs);
        if (validate->parsed())
            return run_validate(val_problem, val_estimator, val_out, val_overrides, val_samples,
                                val_probes, val_workers, val_serial, val_strict);
        if (sweep->parsed())
            return run_sweep(sweep_problem, sweep_overrides, sweep_vary, sweep_values, sweep_out,
                             sweep_mode);
    } catch (const affest::SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: invalid JSON: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
