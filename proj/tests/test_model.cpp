#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>
#include <string>

#include "affest/problem.hpp"

using namespace affest;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const char* kMinimal = R"({
  "version": 1,
  "g": [1.0, -1.0],
  "feasible_set": {"kind": "box", "lower": [0.5, 0.5], "upper": [2.0, 2.0]},
  "channels": [{
    "family": {"kind": "poisson", "dim": 2},
    "map_matrix": [[1.0, 0.0], [0.0, 1.0]],
    "map_offset": [0.0, 0.0],
    "repetitions": 4
  }],
  "epsilon": 0.05,
  "delta": 0.01
})";

json minimal() { return json::parse(kMinimal); }

}  // namespace

TEST_CASE("minimal document parses with defaults") {
    const ProblemSpec spec = parse_problem(kMinimal);
    CHECK(spec.dim() == 2);
    CHECK(spec.g[1] == -1.0);
    REQUIRE(spec.channels.size() == 1);
    CHECK(spec.channels[0].repetitions == 4);
    CHECK(spec.epsilon == 0.05);
    CHECK(spec.delta == 0.01);
    // solver block omitted: documented defaults apply
    CHECK(spec.solver.tol_inner == 1e-7);
    CHECK(spec.solver.tol_alpha == 1e-6);
    CHECK(spec.solver.alpha_min == 1e-8);
    CHECK(spec.solver.alpha_max == 1e8);
    CHECK(spec.solver.max_iter_inner == 10000);
    CHECK(spec.solver.interior_margin == 1e-6);
    CHECK(spec.solver.seed == 0);
    // r = ln(2/epsilon)
    CHECK(spec.r() == doctest::Approx(std::log(40.0)).epsilon(1e-15));

    // simplex floor/total default to 0 and 1
    json j = minimal();
    j["g"] = {1.0, 0.0, 0.0};
    j["feasible_set"] = {{"kind", "simplex"}, {"dim", 3}};
    j["channels"][0]["map_matrix"] = {{1, 0, 0}, {0, 1, 1}};
    const ProblemSpec s2 = problem_from_json(j);
    const auto* sx = std::get_if<Simplex>(&s2.feasible_set);
    REQUIRE(sx != nullptr);
    CHECK(sx->floor == 0.0);
    CHECK(sx->total == 1.0);
}

TEST_CASE("epsilon range is enforced unless explicitly relaxed") {
    json j = minimal();
    j["epsilon"] = 0.3;
    CHECK_THROWS_WITH_AS(problem_from_json(j),
                         doctest::Contains("epsilon out of range (0, 0.25)"), SpecError);

    ParseOptions relaxed;
    relaxed.allow_large_epsilon = true;
    CHECK_NOTHROW(problem_from_json(j, relaxed));

    j["epsilon"] = 1.0;
    CHECK_THROWS_AS(problem_from_json(j, relaxed), SpecError);
    j["epsilon"] = 0.0;
    CHECK_THROWS_AS(problem_from_json(j, relaxed), SpecError);

    // the strict-range message points at the relaxed option
    j["epsilon"] = 0.3;
    try {
        problem_from_json(j);
        FAIL("expected a SpecError");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("relaxed range (0, 1)") != std::string::npos);
    }
}

TEST_CASE("structural errors carry their JSON path") {
    json j = minimal();
    j["channels"][0]["map_matrix"] = {{1.0, 0.0}};  // 1 row, family needs 2
    try {
        problem_from_json(j);
        FAIL("expected a SpecError");
    } catch (const SpecError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("$.channels[0].map_matrix") != std::string::npos);
        CHECK(msg.find("expected the family parameter dimension 2") != std::string::npos);
    }

    j = minimal();
    j["g"] = {1.0, 2.0, 3.0};
    CHECK_THROWS_WITH_AS(problem_from_json(j), doctest::Contains("$.g"), SpecError);

    j = minimal();
    j.erase("delta");
    CHECK_THROWS_AS(problem_from_json(j), SpecError);

    j = minimal();
    j["version"] = 2;
    CHECK_THROWS_WITH_AS(problem_from_json(j), doctest::Contains("version"), SpecError);

    j = minimal();
    j["channels"][0]["repetitions"] = 0;
    CHECK_THROWS_WITH_AS(problem_from_json(j), doctest::Contains("repetitions"), SpecError);

    j = minimal();
    j["channels"] = json::array();
    CHECK_THROWS_AS(problem_from_json(j), SpecError);

    j = minimal();
    j["feasible_set"]["kind"] = "ball";
    CHECK_THROWS_WITH_AS(problem_from_json(j), doctest::Contains("unknown feasible set kind"),
                         SpecError);

    CHECK_THROWS_WITH_AS(parse_problem("{not json"), doctest::Contains("invalid JSON"), SpecError);
}

TEST_CASE("serialization round-trips") {
    const ProblemSpec spec = parse_problem(slurp(std::string(AFFEST_DATA_DIR) + "/two_channel.json"));
    const json out = problem_to_json(spec);
    const ProblemSpec again = problem_from_json(out);
    CHECK(problem_to_json(again).dump() == out.dump());
    CHECK(again.epsilon == spec.epsilon);
    CHECK(again.channels.size() == spec.channels.size());
    CHECK((again.g - spec.g).norm() == 0.0);
    CHECK((again.channels[1].map_matrix - spec.channels[1].map_matrix).norm() == 0.0);
}

TEST_CASE("solver overrides merge onto defaults and are validated") {
    json j = minimal();
    j["solver"] = {{"tol_inner", 1e-9}, {"seed", 42}};
    const ProblemSpec spec = problem_from_json(j);
    CHECK(spec.solver.tol_inner == 1e-9);
    CHECK(spec.solver.seed == 42);
    CHECK(spec.solver.tol_alpha == 1e-6);  // untouched default

    j["solver"] = {{"alpha_min", 1.0}, {"alpha_max", 0.5}};
    CHECK_THROWS_WITH_AS(problem_from_json(j), doctest::Contains("alpha_max"), SpecError);
    j["solver"] = {{"tol_inner", 0.0}};
    CHECK_THROWS_AS(problem_from_json(j), SpecError);
}

TEST_CASE("model validation flags parameters that can leave the family domain") {
    // all shipped examples are clean
    for (const char* name : {"two_point.json", "poisson_rate.json", "gaussian_mean.json",
                             "two_channel.json", "singleton.json"}) {
        const ProblemSpec spec = parse_problem(slurp(std::string(AFFEST_DATA_DIR) + "/" + name));
        CHECK(validate_problem(spec).empty());
    }

    // a floor-0 simplex feeds zero probabilities into a discrete channel
    json j = minimal();
    j["g"] = {1.0, 0.0};
    j["feasible_set"] = {{"kind", "simplex"}, {"dim", 2}};
    j["channels"][0]["family"] = {{"kind", "discrete"}, {"n_outcomes", 2}};
    j["channels"][0]["repetitions"] = 1;
    const auto v1 = validate_problem(problem_from_json(j));
    REQUIRE(!v1.empty());
    CHECK(v1[0].find("channel 0 (discrete)") != std::string::npos);
    CHECK(v1[0].find("coordinate 0") != std::string::npos);
    CHECK(v1[0].find("(0, 1)") != std::string::npos);  // the witness vertex

    // a negative offset drags Poisson rates below zero on part of the box
    j = minimal();
    j["feasible_set"] = {{"kind", "box"}, {"lower", {0.0, 0.0}}, {"upper", {1.0, 1.0}}};
    j["channels"][0]["map_offset"] = {-0.1, 0.0};
    const auto v2 = validate_problem(problem_from_json(j));
    REQUIRE(v2.size() == 2);  // coordinate 0 goes negative; coordinate 1 hits exactly 0 < margin
    CHECK(v2[0].find("channel 0 (poisson)") != std::string::npos);
    CHECK(v2[0].find("-0.1") != std::string::npos);

    // a discrete channel whose mapped coordinates do not sum to one
    j = minimal();
    j["feasible_set"] = {{"kind", "box"}, {"lower", {0.2, 0.2}}, {"upper", {0.7, 0.7}}};
    j["channels"][0]["family"] = {{"kind", "discrete"}, {"n_outcomes", 2}};
    const auto v3 = validate_problem(problem_from_json(j));
    bool found = false;
    for (const auto& msg : v3)
        if (msg.find("expected identically 1") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("channel map applies the affine transformation") {
    const ProblemSpec spec = parse_problem(slurp(std::string(AFFEST_DATA_DIR) + "/two_channel.json"));
    Vector x(2);
    x << 0.3, 0.7;
    const Vector p0 = spec.channels[0].map(x);
    CHECK(p0.size() == 2);
    CHECK(p0[0] == doctest::Approx(0.3));
    const Vector p1 = spec.channels[1].map(x);
    CHECK(p1.size() == 1);
    CHECK(p1[0] == doctest::Approx(-0.4));
}
