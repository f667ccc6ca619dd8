#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "affest/common.hpp"
#include "affest/densities.hpp"
#include "affest/feasible_set.hpp"

// Problem description: which linear functional to estimate, over which
// feasible set, observed through which channels, at which confidence level.
// Parsing/serialization use a versioned JSON schema; parse errors name the
// offending field by path.

namespace affest {

struct SolverConfig {
    double tol_inner = 1e-7;       // Frank-Wolfe gap target for inner maximizations
    double tol_alpha = 1e-6;       // relative bracket width for the alpha search
    double alpha_min = 1e-8;       // alpha search interval, log-scaled
    double alpha_max = 1e8;
    int max_iter_inner = 10000;    // Frank-Wolfe iteration cap
    double interior_margin = 1e-6; // required distance of channel parameters from the domain boundary
    std::uint64_t seed = 0;        // master seed for all randomized routines
};

// One observation channel: the state x is seen through the parameter
// map(x) = map_matrix * x + map_offset of `family`, `repetitions` times
// independently.
struct ChannelModel {
    Family family;
    Matrix map_matrix;
    Vector map_offset;
    int repetitions = 1;

    Vector map(const Vector& x) const { return map_matrix * x + map_offset; }
};

struct ProblemSpec {
    FeasibleSet feasible_set;
    Vector g;                          // functional to estimate: g . x
    std::vector<ChannelModel> channels;
    double epsilon = 0.05;             // two-sided miss probability budget
    double delta = 1e-3;               // requested solver precision on the risk
    SolverConfig solver;

    int dim() const { return ambient_dim(feasible_set); }
    // Confidence radius enters the objective through r = ln(2 / epsilon).
    double r() const { return std::log(2.0 / epsilon); }
};

struct ParseOptions {
    // Relaxes the epsilon range from (0, 0.25) to (0, 1). The tighter
    // default keeps the regime where the construction's near-optimality
    // factor is defined.
    bool allow_large_epsilon = false;
};

// Family fragments appear in both problem and estimator documents.
nlohmann::json family_to_json(const Family& family);
Family family_from_json(const nlohmann::json& doc, const std::string& path);

// Parse/serialize the versioned problem document. parse_problem throws
// SpecError with a field path on any schema violation.
ProblemSpec parse_problem(const std::string& text, const ParseOptions& opts = {});
ProblemSpec problem_from_json(const nlohmann::json& doc, const ParseOptions& opts = {});
nlohmann::json problem_to_json(const ProblemSpec& spec);

// Range-checked setters used by CLI overrides.
void set_epsilon(ProblemSpec& spec, double epsilon, bool allow_large_epsilon = false);
void set_delta(ProblemSpec& spec, double delta);

// Model-level validation beyond the schema: every channel's parameter map
// must send the whole feasible set at least `interior_margin` inside the
// family's parameter domain (and, for discrete channels, onto vectors
// summing to one). Checked exactly via support-function queries; each
// violation message names the channel, the coordinate and a witness vertex.
// Empty result = valid.
std::vector<std::string> validate_problem(const ProblemSpec& spec);

}  // namespace affest
