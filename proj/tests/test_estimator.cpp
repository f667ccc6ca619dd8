#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "affest/estimator.hpp"
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

AffineEstimator solve(const ProblemSpec& spec, ConstantMode mode = ConstantMode::Certified) {
    return build(spec, minimize_alpha(spec), mode);
}

}  // namespace

TEST_CASE("singleton problems produce a constant estimator with vanishing risk") {
    const ProblemSpec spec = load("singleton.json");
    const AffineEstimator est = solve(spec);

    // the only state is (0.3, 0.7), so the estimate must be g.x = 0.3
    CHECK(est.constant_c == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(est.g_x_star == doctest::Approx(0.3));
    // mu* = nu* -> every log-likelihood-ratio weight is zero
    ObservationSet obs;
    obs.outcomes = {{vec({0.0})}};
    CHECK(evaluate(est, obs) == doctest::Approx(est.constant_c).epsilon(1e-15));
    obs.outcomes = {{vec({1.0})}};
    CHECK(evaluate(est, obs) == doctest::Approx(est.constant_c).epsilon(1e-15));

    // risk collapses to the alpha_min * ln(2/epsilon) floor
    const double floor_risk = spec.solver.alpha_min * std::log(40.0);
    CHECK(est.risk >= floor_risk - 1e-18);
    CHECK(est.risk <= floor_risk + 1e-9);
    CHECK(est.provenance.alpha_bound_active);
}

TEST_CASE("reference problem: risk matches the saddle value bracket") {
    const ProblemSpec spec = load("two_point.json");
    const SaddleSolution saddle = minimize_alpha(spec);
    const AffineEstimator est = build(spec, saddle);

    // risk ~ Psi/2 = 0.3 up to solver and certification gaps
    CHECK(est.risk == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(est.risk >= 0.5 * saddle.psi_lower - 0.5 * saddle.inner.fw_gap - 1e-9);
    // the midpoint constant is (g.x* + g.y*)/2 = 0.5 by symmetry
    CHECK(est.constant_c == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(est.epsilon == 0.05);

    // evaluate: the decision is affine in the observed category
    ObservationSet obs;
    obs.outcomes = {{vec({0.0})}};
    const double g0 = evaluate(est, obs);
    obs.outcomes = {{vec({1.0})}};
    const double g1 = evaluate(est, obs);
    // outcome weight difference = alpha * ln[(mu0 nu1)/(mu1 nu0)] / 2
    const auto& ch = est.channels[0];
    const double expected =
        0.5 * est.alpha *
        std::log((ch.mu_star[0] * ch.nu_star[1]) / (ch.mu_star[1] * ch.nu_star[0]));
    CHECK(g0 - g1 == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("certified and closed-form constants agree at a tight saddle") {
    ProblemSpec spec = load("two_channel.json");
    spec.solver.tol_inner = 1e-9;
    const SaddleSolution saddle = minimize_alpha(spec);
    const AffineEstimator cert = build(spec, saddle, ConstantMode::Certified);
    const AffineEstimator closed = build(spec, saddle, ConstantMode::ClosedForm);

    CHECK(cert.provenance.constant_mode == "certified");
    CHECK(closed.provenance.constant_mode == "closed-form");
    CHECK(std::abs(cert.constant_c - closed.constant_c) <=
          1e-4 * (1.0 + std::abs(cert.constant_c)));
    // both modes expose both constants in the provenance
    CHECK(cert.provenance.constant_certified == cert.constant_c);
    CHECK(cert.provenance.constant_closed_form == closed.constant_c);
    // the two risks are both valid; they should be close at a tight saddle
    CHECK(std::abs(cert.risk - closed.risk) <= 1e-3 * (1.0 + cert.risk));
    // identical observation weights: only the constant differs
    CHECK(cert.alpha == closed.alpha);
    CHECK((cert.channels[1].mu_star - closed.channels[1].mu_star).norm() == 0.0);
}

TEST_CASE("repetitions multiply the observation terms") {
    ProblemSpec spec = load("gaussian_mean.json");
    spec.channels[0].repetitions = 2;
    const AffineEstimator est = solve(spec);
    REQUIRE(est.channels.size() == 1);
    CHECK(est.channels[0].repetitions == 2);

    ObservationSet obs;
    obs.outcomes = {{vec({0.4}), vec({0.4})}};
    const double both = evaluate(est, obs);
    // two identical observations contribute twice the single-observation
    // increment over the constant
    const Family& fam = est.channels[0].family;
    const double inc =
        0.5 * est.alpha *
        log_density_ratio(fam, est.channels[0].mu_star, est.channels[0].nu_star, vec({0.4}));
    CHECK(both == doctest::Approx(est.constant_c + 2.0 * inc).epsilon(1e-12));

    // wrong repetition count is rejected
    ObservationSet bad;
    bad.outcomes = {{vec({0.4})}};
    CHECK_THROWS_AS((void)evaluate(est, bad), std::invalid_argument);
    // out-of-domain outcome is rejected
    ObservationSet nan_obs;
    nan_obs.outcomes = {{vec({0.4}), vec({std::nan("")})}};
    CHECK_THROWS_AS((void)evaluate(est, nan_obs), std::domain_error);
}

TEST_CASE("scaling the functional scales the estimator") {
    ProblemSpec spec = load("two_point.json");
    spec.channels[0].repetitions = 100;
    const AffineEstimator base = solve(spec);
    ProblemSpec scaled = spec;
    scaled.g *= 2.0;
    const AffineEstimator twice = solve(scaled);
    CHECK(twice.risk == doctest::Approx(2.0 * base.risk).epsilon(1e-6));
    CHECK(twice.constant_c == doctest::Approx(2.0 * base.constant_c).epsilon(1e-6));
}

TEST_CASE("risk report and its formatting") {
    const ProblemSpec spec = load("two_point.json");
    const AffineEstimator est = solve(spec);
    const RiskReport rep = report(est);
    CHECK(rep.risk == est.risk);
    CHECK(rep.epsilon == 0.05);
    REQUIRE(rep.theta.has_value());
    // 2 + ln 64 / ln(0.25/epsilon) at epsilon = 0.05
    const double expected_theta = 2.0 + std::log(64.0) / std::log(5.0);
    CHECK(std::abs(*rep.theta - expected_theta) <= 1e-12);

    const std::string text = format_report(rep);
    CHECK(text.find("certified risk") != std::string::npos);
    CHECK(text.find("near-optimality factor") != std::string::npos);
    CHECK(text.find("0.05") != std::string::npos);

    // epsilon >= 0.25 has no near-optimality factor
    ProblemSpec wide = load("gaussian_mean.json");
    set_epsilon(wide, 0.3, true);
    const RiskReport wrep = report(solve(wide));
    CHECK(!wrep.theta.has_value());
    CHECK(wrep.theta_note.find("undefined for epsilon >= 0.25") != std::string::npos);
    CHECK(format_report(wrep).find("undefined") != std::string::npos);

    // formatting is byte-stable
    CHECK(format_report(rep) == format_report(report(est)));
}

TEST_CASE("estimator JSON round trip is lossless") {
    const ProblemSpec spec = load("two_channel.json");
    const AffineEstimator est = solve(spec);
    const nlohmann::json doc = estimator_to_json(est);
    CHECK(doc.at("version").get<int>() == 1);

    const AffineEstimator back = estimator_from_json(doc);
    CHECK(back.alpha == est.alpha);
    CHECK(back.constant_c == est.constant_c);
    CHECK(back.risk == est.risk);
    CHECK(back.epsilon == est.epsilon);
    REQUIRE(back.channels.size() == est.channels.size());
    for (std::size_t l = 0; l < est.channels.size(); ++l) {
        CHECK((back.channels[l].mu_star - est.channels[l].mu_star).norm() == 0.0);
        CHECK((back.channels[l].nu_star - est.channels[l].nu_star).norm() == 0.0);
        CHECK(back.channels[l].repetitions == est.channels[l].repetitions);
    }
    CHECK(back.provenance.psi_upper == est.provenance.psi_upper);
    CHECK(back.provenance.constant_mode == est.provenance.constant_mode);
    CHECK(estimator_to_json(back).dump() == doc.dump());

    // identical decisions on an observation set
    ObservationSet obs;
    obs.outcomes = {{vec({0.0}), vec({1.0}), vec({0.0})}, {vec({0.2}), vec({-0.3}), vec({0.0}),
                     vec({0.1}), vec({0.05})}};
    CHECK(evaluate(back, obs) == evaluate(est, obs));

    // version gating
    nlohmann::json bad = doc;
    bad["version"] = 0;
    CHECK_THROWS_AS((void)estimator_from_json(bad), SpecError);
    // corrupted parameters are rejected on load
    bad = doc;
    bad["channels"][0]["mu_star"] = {2.0, -1.0};
    CHECK_THROWS_AS((void)estimator_from_json(bad), SpecError);
}

TEST_CASE("observation JSON documents are validated against the estimator") {
    const ProblemSpec spec = load("two_channel.json");
    const AffineEstimator est = solve(spec);

    nlohmann::json doc = {
        {"channels",
         {{{"index", 0}, {"outcomes", {0, 1, 0}}},
          {{"index", 1}, {"outcomes", {0.2, -0.3, 0.0, 0.1, 0.05}}}}}};
    const ObservationSet obs = observations_from_json(doc, est);
    REQUIRE(obs.outcomes.size() == 2);
    CHECK(obs.outcomes[0].size() == 3);
    CHECK(obs.outcomes[1].size() == 5);
    CHECK(obs.outcomes[1][1][0] == -0.3);

    // round trip preserves the payload
    const ObservationSet again = observations_from_json(observations_to_json(obs), est);
    CHECK(again.outcomes[1][4][0] == 0.05);

    // wrong repetition count
    nlohmann::json bad = doc;
    bad["channels"][0]["outcomes"] = {0, 1};
    CHECK_THROWS_AS((void)observations_from_json(bad, est), SpecError);
    // missing channel
    bad = doc;
    bad["channels"].erase(1);
    CHECK_THROWS_AS((void)observations_from_json(bad, est), SpecError);
    // duplicated channel index
    bad = doc;
    bad["channels"][1]["index"] = 0;
    CHECK_THROWS_AS((void)observations_from_json(bad, est), SpecError);
    // invalid outcome for the discrete channel
    bad = doc;
    bad["channels"][0]["outcomes"] = {0, 1, 7};
    CHECK_THROWS_AS((void)observations_from_json(bad, est), SpecError);
}

TEST_CASE("construction invariants hold on every shipped example") {
    for (const char* name : {"two_point.json", "poisson_rate.json", "gaussian_mean.json",
                             "two_channel.json", "singleton.json"}) {
        const ProblemSpec spec = load(name);
        const AffineEstimator est = solve(spec);
        CHECK(est.risk >= est.alpha * spec.r() - 1e-12 * (1.0 + est.risk));
        CHECK(est.risk >= 0.5 * std::abs(est.g_x_star - est.g_y_star) -
                              1e-9 * (1.0 + est.risk));
        CHECK(est.risk > 0.0);
        for (const auto& ch : est.channels) {
            CHECK_NOTHROW(check_params(ch.family, ch.mu_star));
            CHECK_NOTHROW(check_params(ch.family, ch.nu_star));
        }
        CHECK(est.provenance.psi_upper >= est.provenance.psi_lower);
    }
}
