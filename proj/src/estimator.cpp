#include "affest/estimator.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json_util.hpp"

namespace affest {

namespace {

using nlohmann::json;
using detail::fail;
using detail::need;
using detail::need_bool;
using detail::need_int;
using detail::need_number;
using detail::need_string;
using detail::need_vector;
using detail::to_array;

struct FwResult {
    Vector x;
    double value = 0.0;
    double gap = 0.0;
    bool converged = false;
};

// Frank-Wolfe maximization of a concave objective over a single feasible
// set, with an exact bisection line search; same scheme as the coupled
// solver but for the one-block certification problems.
template <class F, class G>
FwResult fw_maximize(const FeasibleSet& set, const F& f, const G& grad, Vector x, double tol,
                     int max_iter) {
    x = project(set, x);
    double value = f(x);
    for (int it = 0; it < max_iter; ++it) {
        const Vector gr = grad(x);
        const Vector s = lmo(set, gr);
        const double gap = gr.dot(s - x);
        if (gap <= tol) return {x, value, std::max(gap, 0.0), true};
        const Vector d = s - x;
        double t = 1.0;
        if (grad(x + d).dot(d) < 0.0) {
            double lo = 0.0, hi = 1.0;
            for (int i = 0; i < 60; ++i) {
                const double mid = 0.5 * (lo + hi);
                (grad(x + mid * d).dot(d) > 0.0 ? lo : hi) = mid;
            }
            t = 0.5 * (lo + hi);
        }
        const Vector x_next = x + t * d;
        const double value_next = f(x_next);
        if (value_next < value - 1e-9 * (1.0 + std::abs(value)))
            throw std::logic_error(
                "certification maximization: objective decreased along an ascent direction — "
                "non-concave objective (model inconsistency)");
        if (value_next <= value) break;
        x = x_next;
        value = value_next;
    }
    const Vector gr = grad(x);
    const double gap = gr.dot(lmo(set, gr) - x);
    return {x, value, std::max(gap, 0.0), gap <= tol};
}

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

json trace_to_json(const std::vector<AlphaTracePoint>& trace) {
    json arr = json::array();
    for (const auto& pt : trace)
        arr.push_back(json{{"alpha", pt.alpha}, {"psi_lower", pt.psi_lower}, {"psi_upper", pt.psi_upper}});
    return arr;
}

std::vector<AlphaTracePoint> trace_from_json(const json& arr, const std::string& path) {
    if (!arr.is_array()) fail(path, "expected an array");
    std::vector<AlphaTracePoint> trace;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        trace.push_back({need_number(arr[i], "alpha", p), need_number(arr[i], "psi_lower", p),
                         need_number(arr[i], "psi_upper", p)});
    }
    return trace;
}

json solver_to_json(const SolverConfig& cfg) {
    return json{{"tol_inner", cfg.tol_inner},
                {"tol_alpha", cfg.tol_alpha},
                {"alpha_min", cfg.alpha_min},
                {"alpha_max", cfg.alpha_max},
                {"max_iter_inner", cfg.max_iter_inner},
                {"interior_margin", cfg.interior_margin},
                {"seed", cfg.seed}};
}

SolverConfig solver_from_json(const json& j, const std::string& path) {
    SolverConfig cfg;
    cfg.tol_inner = need_number(j, "tol_inner", path);
    cfg.tol_alpha = need_number(j, "tol_alpha", path);
    cfg.alpha_min = need_number(j, "alpha_min", path);
    cfg.alpha_max = need_number(j, "alpha_max", path);
    cfg.max_iter_inner = need_int(j, "max_iter_inner", path);
    cfg.interior_margin = need_number(j, "interior_margin", path);
    const json& s = need(j, "seed", path);
    if (!s.is_number_integer()) fail(path + ".seed", "expected an integer");
    cfg.seed = s.get<std::uint64_t>();
    return cfg;
}

}  // namespace

Certification certify(const ProblemSpec& spec, const SaddleSolution& saddle) {
    const double alpha = saddle.alpha_star;
    std::vector<Vector> mu_star, nu_star;
    for (const auto& ch : spec.channels) {
        mu_star.push_back(ch.map(saddle.inner.x_star));
        nu_star.push_back(ch.map(saddle.inner.y_star));
    }

    // U side bounds the downward deviation of the estimator, V side the
    // upward one; both are concave maximizations over X.
    const auto u_value = [&](const Vector& x) {
        double total = spec.g.dot(x);
        for (std::size_t l = 0; l < spec.channels.size(); ++l) {
            const auto& ch = spec.channels[l];
            total += alpha * ch.repetitions *
                     tilted_log(ch.family, ch.map(x), mu_star[l], nu_star[l]);
        }
        return total;
    };
    const auto u_grad = [&](const Vector& x) {
        Vector g = spec.g;
        for (std::size_t l = 0; l < spec.channels.size(); ++l) {
            const auto& ch = spec.channels[l];
            g.noalias() += alpha * ch.repetitions *
                           (ch.map_matrix.transpose() *
                            tilted_log_grad(ch.family, ch.map(x), mu_star[l], nu_star[l]));
        }
        return g;
    };
    const auto v_value = [&](const Vector& y) {
        double total = -spec.g.dot(y);
        for (std::size_t l = 0; l < spec.channels.size(); ++l) {
            const auto& ch = spec.channels[l];
            total += alpha * ch.repetitions *
                     tilted_log(ch.family, ch.map(y), nu_star[l], mu_star[l]);
        }
        return total;
    };
    const auto v_grad = [&](const Vector& y) {
        Vector g = -spec.g;
        for (std::size_t l = 0; l < spec.channels.size(); ++l) {
            const auto& ch = spec.channels[l];
            g.noalias() += alpha * ch.repetitions *
                           (ch.map_matrix.transpose() *
                            tilted_log_grad(ch.family, ch.map(y), nu_star[l], mu_star[l]));
        }
        return g;
    };

    // At an exact saddle the maximizers are x* and y* themselves, so warm
    // starting there makes certification cheap.
    const FwResult u = fw_maximize(spec.feasible_set, u_value, u_grad, saddle.inner.x_star,
                                   spec.solver.tol_inner, spec.solver.max_iter_inner);
    const FwResult v = fw_maximize(spec.feasible_set, v_value, v_grad, saddle.inner.y_star,
                                   spec.solver.tol_inner, spec.solver.max_iter_inner);

    Certification cert;
    cert.u_value = u.value;
    cert.u_gap = u.gap;
    cert.u_upper = u.value + u.gap;
    cert.v_value = v.value;
    cert.v_gap = v.gap;
    cert.v_upper = v.value + v.gap;
    cert.c = 0.5 * (cert.u_upper - cert.v_upper);
    return cert;
}

double simple_constant(const ProblemSpec& spec, const SaddleSolution& saddle) {
    return 0.5 * (spec.g.dot(saddle.inner.x_star) + spec.g.dot(saddle.inner.y_star));
}

AffineEstimator build(const ProblemSpec& spec, const SaddleSolution& saddle, ConstantMode mode) {
    const double alpha = saddle.alpha_star;
    const double r = spec.r();
    const Certification cert = certify(spec, saddle);
    const double c_closed = simple_constant(spec, saddle);

    AffineEstimator est;
    est.alpha = alpha;
    est.epsilon = spec.epsilon;
    est.g_x_star = spec.g.dot(saddle.inner.x_star);
    est.g_y_star = spec.g.dot(saddle.inner.y_star);
    if (mode == ConstantMode::Certified) {
        est.constant_c = cert.c;
        est.risk = 0.5 * (cert.u_upper + cert.v_upper) + alpha * r;
    } else {
        est.constant_c = c_closed;
        est.risk = std::max(cert.u_upper - c_closed, cert.v_upper + c_closed) + alpha * r;
    }

    for (const auto& ch : spec.channels) {
        EstimatorChannel ec;
        ec.family = ch.family;
        ec.mu_star = ch.map(saddle.inner.x_star);
        ec.nu_star = ch.map(saddle.inner.y_star);
        ec.repetitions = ch.repetitions;
        try {
            check_params(ec.family, ec.mu_star);
            check_params(ec.family, ec.nu_star);
        } catch (const std::domain_error& e) {
            throw std::logic_error(std::string("estimator construction produced out-of-domain "
                                               "channel parameters (internal error): ") +
                                   e.what());
        }
        est.channels.push_back(std::move(ec));
    }

    // Construction invariants; failures mean the optimizer or certification
    // math is broken, not that the input was bad.
    const double scale = 1.0 + std::abs(cert.u_upper) + std::abs(cert.v_upper) + alpha * r;
    if (est.risk < alpha * r - 1e-12 * scale)
        throw std::logic_error("certified risk fell below its alpha * ln(2/eps) floor");
    // Spread floor: the certification maximizations are warm-started at
    // x*, y*, where T(mu; mu, nu) reduces to the plain affinity, so
    //   risk >= (g.x* - g.y*)/2 + alpha (r + sum_l R_l ln Aff_l(mu*, nu*))
    // holds identically at ANY alpha (the affinity surplus is the outer
    // derivative d psi / d ln alpha / 2 and may be slightly negative when
    // the alpha search lands past the optimum).
    double aff_term = 0.0;
    for (const auto& ec : est.channels)
        aff_term += ec.repetitions * log_affinity(ec.family, ec.mu_star, ec.nu_star);
    const double spread_floor =
        0.5 * (est.g_x_star - est.g_y_star) + alpha * (r + aff_term);
    if (est.risk < spread_floor - 1e-9 * scale)
        throw std::logic_error(
            "certified risk fell below the saddle-spread identity floor "
            "(g.x* - g.y*)/2 + alpha (ln(2/eps) + affinity surplus)");

    Provenance& prov = est.provenance;
    prov.psi_lower = saddle.psi_lower;
    prov.psi_upper = saddle.psi_upper;
    prov.inner_fw_gap = saddle.inner.fw_gap;
    prov.cert_gap_u = cert.u_gap;
    prov.cert_gap_v = cert.v_gap;
    prov.delta_solver = saddle.delta_solver;
    prov.alpha_bound_active = saddle.alpha_bound_active;
    prov.precision_met = saddle.delta_solver <= spec.delta;
    prov.x_star = saddle.inner.x_star;
    prov.y_star = saddle.inner.y_star;
    prov.trace = saddle.trace;
    prov.solver = spec.solver;
    prov.constant_mode = mode == ConstantMode::Certified ? "certified" : "closed-form";
    prov.constant_certified = cert.c;
    prov.constant_closed_form = c_closed;
    return est;
}

double evaluate(const AffineEstimator& est, const ObservationSet& obs) {
    if (obs.outcomes.size() != est.channels.size())
        throw std::invalid_argument("observations: have " + std::to_string(obs.outcomes.size()) +
                                    " channels, estimator expects " +
                                    std::to_string(est.channels.size()));
    double total = est.constant_c;
    for (std::size_t l = 0; l < est.channels.size(); ++l) {
        const EstimatorChannel& ch = est.channels[l];
        if (static_cast<int>(obs.outcomes[l].size()) != ch.repetitions)
            throw std::invalid_argument("observations: channel " + std::to_string(l) + " has " +
                                        std::to_string(obs.outcomes[l].size()) +
                                        " outcomes, expected " + std::to_string(ch.repetitions));
        for (const Vector& outcome : obs.outcomes[l]) {
            check_outcome(ch.family, outcome);
            total += 0.5 * est.alpha * log_density_ratio(ch.family, ch.mu_star, ch.nu_star, outcome);
        }
    }
    return total;
}

RiskReport report(const AffineEstimator& est) {
    RiskReport rep;
    rep.risk = est.risk;
    rep.epsilon = est.epsilon;
    rep.alpha = est.alpha;
    rep.constant_c = est.constant_c;
    rep.psi_lower = est.provenance.psi_lower;
    rep.psi_upper = est.provenance.psi_upper;
    rep.delta_solver = est.provenance.delta_solver;
    rep.precision_met = est.provenance.precision_met;
    rep.alpha_bound_active = est.provenance.alpha_bound_active;
    if (est.epsilon < 0.25) {
        rep.theta = 2.0 + std::log(64.0) / std::log(0.25 / est.epsilon);
        rep.theta_note = "";
    } else {
        rep.theta = std::nullopt;
        rep.theta_note = "near-optimality factor is undefined for epsilon >= 0.25";
    }
    return rep;
}

std::string format_report(const RiskReport& rep) {
    std::ostringstream os;
    os << "certified risk         : " << format_double("%.12g", rep.risk) << "\n";
    os << "epsilon                : " << format_double("%.12g", rep.epsilon)
       << "  (interval = estimate +/- risk, misses with probability <= epsilon)\n";
    os << "alpha                  : " << format_double("%.12g", rep.alpha)
       << (rep.alpha_bound_active ? "  [clamped to a solver bound]" : "") << "\n";
    os << "constant c             : " << format_double("%.12g", rep.constant_c) << "\n";
    os << "psi bracket            : [" << format_double("%.12g", rep.psi_lower) << ", "
       << format_double("%.12g", rep.psi_upper) << "]\n";
    os << "solver precision       : " << format_double("%.6g", rep.delta_solver)
       << (rep.precision_met ? "  [meets the requested delta]"
                             : "  [WARNING: exceeds the requested delta]")
       << "\n";
    if (rep.theta)
        os << "near-optimality factor : " << format_double("%.12g", *rep.theta)
           << "  (certified risk is within this factor of the best achievable)\n";
    else
        os << "near-optimality factor : n/a  (" << rep.theta_note << ")\n";
    return os.str();
}

json estimator_to_json(const AffineEstimator& est) {
    json channels = json::array();
    for (const auto& ch : est.channels) {
        channels.push_back(json{{"family", family_to_json(ch.family)},
                                {"mu_star", to_array(ch.mu_star)},
                                {"nu_star", to_array(ch.nu_star)},
                                {"repetitions", ch.repetitions}});
    }
    const Provenance& prov = est.provenance;
    json provenance = json{{"psi_lower", prov.psi_lower},
                           {"psi_upper", prov.psi_upper},
                           {"inner_fw_gap", prov.inner_fw_gap},
                           {"cert_gap_u", prov.cert_gap_u},
                           {"cert_gap_v", prov.cert_gap_v},
                           {"delta_solver", prov.delta_solver},
                           {"alpha_bound_active", prov.alpha_bound_active},
                           {"precision_met", prov.precision_met},
                           {"x_star", to_array(prov.x_star)},
                           {"y_star", to_array(prov.y_star)},
                           {"trace", trace_to_json(prov.trace)},
                           {"solver", solver_to_json(prov.solver)},
                           {"constant_mode", prov.constant_mode},
                           {"constant_certified", prov.constant_certified},
                           {"constant_closed_form", prov.constant_closed_form}};
    return json{{"version", 1},
                {"alpha", est.alpha},
                {"constant_c", est.constant_c},
                {"risk", est.risk},
                {"epsilon", est.epsilon},
                {"g_x_star", est.g_x_star},
                {"g_y_star", est.g_y_star},
                {"channels", std::move(channels)},
                {"provenance", std::move(provenance)}};
}

AffineEstimator estimator_from_json(const json& doc) {
    const std::string root = "$";
    const json& version = need(doc, "version", root);
    if (!version.is_number_integer() || version.get<int>() != 1)
        fail(root + ".version", "unsupported estimator version (expected 1)");

    AffineEstimator est;
    est.alpha = need_number(doc, "alpha", root);
    est.constant_c = need_number(doc, "constant_c", root);
    est.risk = need_number(doc, "risk", root);
    est.epsilon = need_number(doc, "epsilon", root);
    est.g_x_star = need_number(doc, "g_x_star", root);
    est.g_y_star = need_number(doc, "g_y_star", root);
    if (!(est.alpha > 0.0)) fail(root + ".alpha", "must be > 0");
    if (!(est.risk >= 0.0)) fail(root + ".risk", "must be >= 0");
    if (!(est.epsilon > 0.0 && est.epsilon < 1.0)) fail(root + ".epsilon", "must be in (0, 1)");

    const json& channels = need(doc, "channels", root);
    if (!channels.is_array() || channels.empty()) fail(root + ".channels", "expected a non-empty array");
    for (std::size_t l = 0; l < channels.size(); ++l) {
        const std::string pc = root + ".channels[" + std::to_string(l) + "]";
        EstimatorChannel ch;
        ch.family = family_from_json(need(channels[l], "family", pc), pc + ".family");
        ch.mu_star = need_vector(channels[l], "mu_star", pc);
        ch.nu_star = need_vector(channels[l], "nu_star", pc);
        ch.repetitions = need_int(channels[l], "repetitions", pc);
        if (ch.repetitions < 1) fail(pc + ".repetitions", "must be >= 1");
        try {
            check_params(ch.family, ch.mu_star);
            check_params(ch.family, ch.nu_star);
        } catch (const std::domain_error& e) {
            fail(pc, e.what());
        }
        est.channels.push_back(std::move(ch));
    }

    const json& prov = need(doc, "provenance", root);
    const std::string pp = root + ".provenance";
    Provenance& p = est.provenance;
    p.psi_lower = need_number(prov, "psi_lower", pp);
    p.psi_upper = need_number(prov, "psi_upper", pp);
    p.inner_fw_gap = need_number(prov, "inner_fw_gap", pp);
    p.cert_gap_u = need_number(prov, "cert_gap_u", pp);
    p.cert_gap_v = need_number(prov, "cert_gap_v", pp);
    p.delta_solver = need_number(prov, "delta_solver", pp);
    p.alpha_bound_active = need_bool(prov, "alpha_bound_active", pp);
    p.precision_met = need_bool(prov, "precision_met", pp);
    p.x_star = need_vector(prov, "x_star", pp);
    p.y_star = need_vector(prov, "y_star", pp);
    p.trace = trace_from_json(need(prov, "trace", pp), pp + ".trace");
    p.solver = solver_from_json(need(prov, "solver", pp), pp + ".solver");
    p.constant_mode = need_string(prov, "constant_mode", pp);
    p.constant_certified = need_number(prov, "constant_certified", pp);
    p.constant_closed_form = need_number(prov, "constant_closed_form", pp);
    return est;
}

ObservationSet observations_from_json(const json& doc, const AffineEstimator& est) {
    const std::string root = "$";
    const json& channels = need(doc, "channels", root);
    if (!channels.is_array()) fail(root + ".channels", "expected an array");
    if (channels.size() != est.channels.size())
        fail(root + ".channels", "has " + std::to_string(channels.size()) +
                                     " entries, estimator expects " +
                                     std::to_string(est.channels.size()));

    ObservationSet obs;
    obs.outcomes.resize(est.channels.size());
    std::vector<bool> seen(est.channels.size(), false);
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const std::string pc = root + ".channels[" + std::to_string(i) + "]";
        const int index = need_int(channels[i], "index", pc);
        if (index < 0 || index >= static_cast<int>(est.channels.size()))
            fail(pc + ".index", "channel index out of range");
        if (seen[index]) fail(pc + ".index", "duplicate channel index " + std::to_string(index));
        seen[index] = true;

        const EstimatorChannel& ch = est.channels[index];
        const json& outcomes = need(channels[i], "outcomes", pc);
        const std::string po = pc + ".outcomes";
        if (!outcomes.is_array()) fail(po, "expected an array");
        if (static_cast<int>(outcomes.size()) != ch.repetitions)
            fail(po, "has " + std::to_string(outcomes.size()) + " outcomes, expected " +
                         std::to_string(ch.repetitions) + " repetitions");
        for (std::size_t k = 0; k < outcomes.size(); ++k) {
            const std::string pk = po + "[" + std::to_string(k) + "]";
            Vector outcome;
            if (outcomes[k].is_number()) {
                outcome.resize(1);
                outcome[0] = outcomes[k].get<double>();
            } else if (outcomes[k].is_array() && !outcomes[k].empty()) {
                outcome.resize(outcomes[k].size());
                for (std::size_t c = 0; c < outcomes[k].size(); ++c) {
                    if (!outcomes[k][c].is_number())
                        fail(pk + "[" + std::to_string(c) + "]", "expected a number");
                    outcome[static_cast<int>(c)] = outcomes[k][c].get<double>();
                }
            } else {
                fail(pk, "expected a number or a non-empty array of numbers");
            }
            try {
                check_outcome(ch.family, outcome);
            } catch (const std::domain_error& e) {
                fail(pk, e.what());
            }
            obs.outcomes[index].push_back(std::move(outcome));
        }
    }
    return obs;
}

json observations_to_json(const ObservationSet& obs) {
    json channels = json::array();
    for (std::size_t l = 0; l < obs.outcomes.size(); ++l) {
        json outcomes = json::array();
        for (const Vector& outcome : obs.outcomes[l]) {
            if (outcome.size() == 1)
                outcomes.push_back(outcome[0]);
            else
                outcomes.push_back(to_array(outcome));
        }
        channels.push_back(json{{"index", static_cast<int>(l)}, {"outcomes", std::move(outcomes)}});
    }
    return json{{"channels", std::move(channels)}};
}

}  // namespace affest
