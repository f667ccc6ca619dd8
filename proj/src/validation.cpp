#include "affest/validation.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "affest/rng.hpp"
#include "json_util.hpp"

namespace affest {

namespace {

using detail::to_array;
using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// --- Monte Carlo coverage -------------------------------------------------

// Misses of one (probe, worker) cell. Sample s is handled by the worker
// with s % workers == worker, each cell on its own random stream, so the
// decomposition is independent of scheduling and thread count, and the
// serial and OpenMP drivers are bit-identical by construction.
std::int64_t coverage_worker_misses(const AffineEstimator& est,
                                    const std::vector<Vector>& true_params, double truth,
                                    std::int64_t n_samples, std::uint64_t seed,
                                    std::uint64_t stream, int worker, int workers) {
    std::mt19937_64 rng = make_stream(seed, stream);
    const double half_alpha = 0.5 * est.alpha;
    Vector outcome;
    std::int64_t misses = 0;
    for (std::int64_t s = worker; s < n_samples; s += workers) {
        double ghat = est.constant_c;
        for (std::size_t l = 0; l < est.channels.size(); ++l) {
            const EstimatorChannel& ch = est.channels[l];
            for (int rep = 0; rep < ch.repetitions; ++rep) {
                sample_into(ch.family, true_params[l], rng, outcome);
                ghat += half_alpha * log_density_ratio(ch.family, ch.mu_star, ch.nu_star, outcome);
            }
        }
        if (std::abs(ghat - truth) > est.risk) ++misses;
    }
    return misses;
}

CoverageReport coverage_core(const ProblemSpec& spec, const AffineEstimator& est,
                             const std::vector<Vector>& probes, std::int64_t n_samples,
                             std::uint64_t seed, int workers, bool parallel) {
    if (n_samples < 1) throw std::invalid_argument("coverage: n_samples must be >= 1");
    if (workers < 1) throw std::invalid_argument("coverage: workers must be >= 1");
    if (probes.empty()) throw std::invalid_argument("coverage: need at least one probe state");
    if (est.channels.size() != spec.channels.size())
        throw std::invalid_argument("coverage: estimator/spec channel count mismatch");

    CoverageReport report;
    report.epsilon = est.epsilon;
    report.seed = seed;
    report.workers = workers;
    report.n_samples = n_samples;
    report.pass = true;

    const double half_width = 3.0 * std::sqrt(est.epsilon * (1.0 - est.epsilon) /
                                              static_cast<double>(n_samples));

    for (std::size_t i = 0; i < probes.size(); ++i) {
        const Vector& probe = probes[i];
        if (!contains(spec.feasible_set, probe, 1e-7))
            throw std::invalid_argument("coverage: probe " + std::to_string(i) +
                                        " lies outside the feasible set");
        std::vector<Vector> true_params;
        for (const auto& ch : spec.channels) {
            Vector p = ch.map(probe);
            check_params(ch.family, p);  // must be a valid sampling distribution
            true_params.push_back(std::move(p));
        }
        const double truth = spec.g.dot(probe);

        std::vector<std::int64_t> counts(workers, 0);
        if (parallel) {
#pragma omp parallel for schedule(static)
            for (int w = 0; w < workers; ++w)
                counts[w] = coverage_worker_misses(
                    est, true_params, truth, n_samples, seed,
                    static_cast<std::uint64_t>(i) * workers + w, w, workers);
        } else {
            for (int w = 0; w < workers; ++w)
                counts[w] = coverage_worker_misses(
                    est, true_params, truth, n_samples, seed,
                    static_cast<std::uint64_t>(i) * workers + w, w, workers);
        }

        ProbeResult pr;
        pr.state = probe;
        pr.n_samples = n_samples;
        pr.misses = 0;
        for (const auto c : counts) pr.misses += c;
        pr.miss_rate = static_cast<double>(pr.misses) / static_cast<double>(n_samples);
        pr.mc_half_width = half_width;
        if (pr.miss_rate > est.epsilon + half_width) report.pass = false;
        report.probes.push_back(std::move(pr));
    }
    return report;
}

// --- Grid oracle ----------------------------------------------------------

// Grid states come from the intrinsic parameterization: a per-coordinate
// lattice for boxes, lattice barycentric weights for simplexes and vertex
// hulls. Affinities reduce to dot products of per-state transformed
// parameter vectors, so the pair loop is a handful of flops per channel.
struct OracleData {
    std::vector<double> objective;  // g . x per state
    struct Channel {
        int kind = 0;  // 0 discrete, 1 poisson, 2 gaussian
        double weight = 1.0;
        Matrix t;   // transformed params, one column per state
        Vector h;   // per-state scalar part of the log affinity
    };
    std::vector<Channel> channels;
    int n_states = 0;
};

void compositions(int levels, int parts, std::vector<int>& current,
                  const std::function<void(const std::vector<int>&)>& emit) {
    if (parts == 1) {
        current.push_back(levels);
        emit(current);
        current.pop_back();
        return;
    }
    for (int i = 0; i <= levels; ++i) {
        current.push_back(i);
        compositions(levels - i, parts - 1, current, emit);
        current.pop_back();
    }
}

std::vector<Vector> grid_states(const FeasibleSet& set, int grid_points) {
    if (grid_points < 2) throw std::invalid_argument("grid oracle: grid_points must be >= 2");
    std::vector<Vector> states;
    std::visit(
        overloaded{
            [&](const Box& b) {
                const int n = static_cast<int>(b.lower.size());
                const double denom = grid_points - 1;
                std::vector<int> digit(n, 0);
                while (true) {
                    Vector x(n);
                    for (int i = 0; i < n; ++i)
                        x[i] = b.lower[i] + (b.upper[i] - b.lower[i]) * (digit[i] / denom);
                    states.push_back(std::move(x));
                    int pos = 0;
                    while (pos < n && ++digit[pos] == grid_points) digit[pos++] = 0;
                    if (pos == n) break;
                }
            },
            [&](const Simplex& s) {
                const double budget = s.total - s.dim * s.floor;
                const double denom = grid_points - 1;
                std::vector<int> current;
                compositions(grid_points - 1, s.dim, current, [&](const std::vector<int>& w) {
                    Vector x(s.dim);
                    for (int i = 0; i < s.dim; ++i) x[i] = s.floor + budget * (w[i] / denom);
                    states.push_back(std::move(x));
                });
            },
            [&](const Polytope& p) {
                const int k = static_cast<int>(p.vertices.size());
                if (k == 1) {
                    states.push_back(p.vertices[0]);
                    return;
                }
                const double denom = grid_points - 1;
                std::vector<int> current;
                compositions(grid_points - 1, k, current, [&](const std::vector<int>& w) {
                    Vector x = Vector::Zero(p.vertices[0].size());
                    for (int i = 0; i < k; ++i) x += (w[i] / denom) * p.vertices[i];
                    states.push_back(std::move(x));
                });
            }},
        set);
    return states;
}

OracleData prepare_oracle(const ProblemSpec& spec, int grid_points) {
    const std::vector<Vector> states = grid_states(spec.feasible_set, grid_points);
    const std::int64_t n = static_cast<std::int64_t>(states.size());
    constexpr std::int64_t kPairBudget = 400'000'000;
    if (n * n > kPairBudget)
        throw std::domain_error(
            "grid oracle: " + std::to_string(n) + " states give " + std::to_string(n * n) +
            " pairs, over the budget of " + std::to_string(kPairBudget) +
            " — reduce grid_points (the feasible set dimension is too large for a grid check)");

    OracleData data;
    data.n_states = static_cast<int>(n);
    data.objective.resize(n);
    for (std::int64_t s = 0; s < n; ++s) data.objective[s] = spec.g.dot(states[s]);

    for (const auto& ch : spec.channels) {
        OracleData::Channel oc;
        oc.weight = ch.repetitions;
        const int m = param_dim(ch.family);
        oc.t.resize(m, n);
        oc.h = Vector::Zero(n);
        std::visit(overloaded{[&](const Discrete&) { oc.kind = 0; },
                              [&](const PoissonVec&) { oc.kind = 1; },
                              [&](const GaussianVec&) { oc.kind = 2; }},
                   ch.family);
        for (std::int64_t s = 0; s < n; ++s) {
            const Vector params = ch.map(states[s]);
            switch (oc.kind) {
                case 0:  // ln aff = ln( sqrt(mu) . sqrt(nu) )
                    oc.t.col(s) = params.cwiseSqrt();
                    break;
                case 1:  // ln aff = sqrt(mu) . sqrt(nu) - h_i - h_j
                    oc.t.col(s) = params.cwiseSqrt();
                    oc.h[s] = 0.5 * oc.t.col(s).squaredNorm();
                    break;
                case 2: {  // ln aff = 2 a_i . a_j - h_i - h_j, a = mu / (2 sqrt(2) sigma)
                    const auto& gauss = std::get<GaussianVec>(ch.family);
                    oc.t.col(s) =
                        params.array() / (2.0 * std::sqrt(2.0) * gauss.sigmas.array());
                    oc.h[s] = oc.t.col(s).squaredNorm();
                    break;
                }
            }
        }
        data.channels.push_back(std::move(oc));
    }
    return data;
}

inline double oracle_log_affinity(const OracleData::Channel& ch, int i, int j) {
    const double dot = ch.t.col(i).dot(ch.t.col(j));
    switch (ch.kind) {
        case 0:
            return std::log(dot);
        case 1:
            return dot - ch.h[i] - ch.h[j];
        default:
            return 2.0 * dot - ch.h[i] - ch.h[j];
    }
}

double oracle_row_best(const OracleData& data, double r, int i, double best) {
    const double gi = data.objective[i];
    for (int j = 0; j < data.n_states; ++j) {
        const double value = gi - data.objective[j];
        if (value <= best) continue;  // cannot improve, skip the constraint work
        double log_aff = 0.0;
        for (const auto& ch : data.channels) log_aff += ch.weight * oracle_log_affinity(ch, i, j);
        if (log_aff >= -r) best = value;
    }
    return best;
}

// --- finite differences ---------------------------------------------------

struct FdWorst {
    double worst = 0.0;
    void update(double analytic, double numeric) {
        const double rel = std::abs(numeric - analytic) / std::max(1.0, std::abs(analytic));
        worst = std::max(worst, rel);
    }
};

// Random interior parameter for a family (comfortably away from the
// boundary so central differences stay in-domain).
Vector random_params(const Family& family, std::mt19937_64& rng) {
    return std::visit(overloaded{[&](const Discrete& d) {
                                     Vector w(d.n_outcomes);
                                     for (int i = 0; i < d.n_outcomes; ++i)
                                         w[i] = 0.1 + uniform01(rng);
                                     return Vector(w / w.sum());
                                 },
                                 [&](const PoissonVec& p) {
                                     Vector w(p.dim);
                                     for (int i = 0; i < p.dim; ++i)
                                         w[i] = 0.5 + 4.5 * uniform01(rng);
                                     return w;
                                 },
                                 [&](const GaussianVec& g) {
                                     Vector w(g.dim);
                                     for (int i = 0; i < g.dim; ++i)
                                         w[i] = -2.0 + 4.0 * uniform01(rng);
                                     return w;
                                 }},
                      family);
}

// Random perturbation direction that keeps family parameters inside their
// domain: tangent to the probability simplex for discrete families (the
// domain carries a sum constraint), unconstrained otherwise.
Vector random_direction(const Family& family, std::mt19937_64& rng) {
    const int m = param_dim(family);
    Vector u(m);
    for (int i = 0; i < m; ++i) u[i] = 2.0 * uniform01(rng) - 1.0;
    if (std::holds_alternative<Discrete>(family)) u.array() -= u.mean();
    const double norm = u.lpNorm<Eigen::Infinity>();
    return norm > 0 ? Vector(u / norm) : Vector(Vector::Unit(m, 0));
}

}  // namespace

CoverageReport coverage_mc(const ProblemSpec& spec, const AffineEstimator& est,
                           const std::vector<Vector>& probes, std::int64_t n_samples,
                           std::uint64_t seed, int workers) {
    return coverage_core(spec, est, probes, n_samples, seed, workers, true);
}

CoverageReport coverage_mc_serial(const ProblemSpec& spec, const AffineEstimator& est,
                                  const std::vector<Vector>& probes, std::int64_t n_samples,
                                  std::uint64_t seed, int workers) {
    return coverage_core(spec, est, probes, n_samples, seed, workers, false);
}

json coverage_to_json(const CoverageReport& report) {
    json probes = json::array();
    for (const auto& pr : report.probes) {
        probes.push_back(json{{"state", to_array(pr.state)},
                              {"n_samples", pr.n_samples},
                              {"misses", pr.misses},
                              {"miss_rate", pr.miss_rate},
                              {"mc_half_width", pr.mc_half_width}});
    }
    return json{{"epsilon", report.epsilon}, {"pass", report.pass},
                {"seed", report.seed},       {"workers", report.workers},
                {"n_samples", report.n_samples}, {"probes", std::move(probes)}};
}

std::vector<Vector> default_probes(const ProblemSpec& spec, const AffineEstimator& est,
                                   int n_random, std::uint64_t seed) {
    std::vector<Vector> probes;
    probes.push_back(est.provenance.x_star);
    probes.push_back(est.provenance.y_star);
    std::mt19937_64 rng = make_stream(seed, 0xC0FFEEull);
    for (int i = 0; i < n_random; ++i) probes.push_back(sample_point(spec.feasible_set, rng));
    return probes;
}

double dual_value_oracle(const ProblemSpec& spec, double r, int grid_points) {
    const OracleData data = prepare_oracle(spec, grid_points);
    double best = -std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(max : best)
    for (int i = 0; i < data.n_states; ++i) best = oracle_row_best(data, r, i, best);
    return best;
}

double dual_value_oracle_serial(const ProblemSpec& spec, double r, int grid_points) {
    const OracleData data = prepare_oracle(spec, grid_points);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < data.n_states; ++i) best = oracle_row_best(data, r, i, best);
    return best;
}

double finite_diff_suite(const ProblemSpec& spec, int n_points, std::uint64_t seed,
                         double step) {
    if (n_points < 1) throw std::invalid_argument("finite_diff_suite: n_points must be >= 1");
    if (!(step > 0.0)) throw std::invalid_argument("finite_diff_suite: step must be > 0");
    FdWorst worst;
    std::mt19937_64 rng = make_stream(seed, 0xFD5EEDull);

    const auto central = [&](const auto& f) { return (f(step) - f(-step)) / (2.0 * step); };

    for (const auto& ch : spec.channels) {
        const Family& fam = ch.family;
        for (int p = 0; p < n_points; ++p) {
            const Vector mu = random_params(fam, rng);
            const Vector nu = random_params(fam, rng);
            const Vector lambda = random_params(fam, rng);
            const Vector du = random_direction(fam, rng);
            const Vector dv = random_direction(fam, rng);

            // log affinity: directional derivatives in mu and in nu.
            const auto [gmu, gnu] = log_affinity_grad(fam, mu, nu);
            worst.update(gmu.dot(du),
                         central([&](double h) { return log_affinity(fam, mu + h * du, nu); }));
            worst.update(gnu.dot(dv),
                         central([&](double h) { return log_affinity(fam, mu, nu + h * dv); }));

            // tilted integral: directional derivative in lambda.
            const Vector gt = tilted_log_grad(fam, lambda, mu, nu);
            worst.update(gt.dot(du), central([&](double h) {
                             return tilted_log(fam, lambda + h * du, mu, nu);
                         }));
        }
    }

    // Coupled objective over X x X at random interior states (pulled toward
    // the interior point so the finite-difference stencil stays feasible).
    //
    // Directions must keep the stencil inside the domain of every channel:
    // discrete channels require the mapped parameters to stay on the
    // probability simplex, so each direction d must satisfy 1^T M_l d = 0.
    // A simplex feasible set adds the analogous state-space constraint
    // 1^T d = 0. Collect those normals, orthonormalize, and project.
    const int n = spec.dim();
    std::vector<Vector> normals;
    if (std::holds_alternative<Simplex>(spec.feasible_set)) {
        normals.push_back(Vector::Ones(n));
    }
    for (const ChannelModel& ch : spec.channels) {
        if (std::holds_alternative<Discrete>(ch.family)) {
            normals.push_back(ch.map_matrix.transpose() * Vector::Ones(ch.map_matrix.rows()));
        }
    }
    std::vector<Vector> basis;  // orthonormal span of the constraint normals
    for (Vector v : normals) {
        for (const Vector& b : basis) v -= b.dot(v) * b;
        const double norm = v.norm();
        if (norm > 1e-12) basis.push_back(v / norm);
    }
    const auto project_tangent = [&](Vector d) {
        for (const Vector& b : basis) d -= b.dot(d) * b;
        return d;
    };
    const Vector center = interior_point(spec.feasible_set);
    for (int p = 0; p < n_points; ++p) {
        const Vector x = 0.7 * sample_point(spec.feasible_set, rng) + 0.3 * center;
        const Vector y = 0.7 * sample_point(spec.feasible_set, rng) + 0.3 * center;
        Vector ux(n), uy(n);
        for (int i = 0; i < n; ++i) ux[i] = 2.0 * uniform01(rng) - 1.0;
        for (int i = 0; i < n; ++i) uy[i] = 2.0 * uniform01(rng) - 1.0;
        ux = project_tangent(ux);
        uy = project_tangent(uy);
        const double sx = ux.lpNorm<Eigen::Infinity>();
        const double sy = uy.lpNorm<Eigen::Infinity>();
        if (sx > 0) ux /= sx;
        if (sy > 0) uy /= sy;
        const double alpha = std::exp(std::log(1e-3) + uniform01(rng) * std::log(1e5));
        const auto [gx, gy] = coupled_gradient(spec, alpha, x, y);
        worst.update(gx.dot(ux), central([&](double h) {
                         return coupled_objective(spec, alpha, x + h * ux, y);
                     }));
        worst.update(gy.dot(uy), central([&](double h) {
                         return coupled_objective(spec, alpha, x, y + h * uy);
                     }));
    }
    return worst.worst;
}

std::vector<CheckResult> consistency_suite(const ProblemSpec& spec, const AffineEstimator& est) {
    std::vector<CheckResult> out;
    const Provenance& prov = est.provenance;

    {  // T(mu*; mu*, nu*) must equal the affinity, per channel, both ways.
        double worst = 0.0;
        for (const auto& ch : est.channels) {
            const double la = log_affinity(ch.family, ch.mu_star, ch.nu_star);
            worst = std::max(worst,
                             std::abs(tilted_log(ch.family, ch.mu_star, ch.mu_star, ch.nu_star) - la));
            worst = std::max(worst,
                             std::abs(tilted_log(ch.family, ch.nu_star, ch.nu_star, ch.mu_star) - la));
        }
        out.push_back({"tilted_matches_affinity_at_base", worst <= 1e-12, worst,
                       "equal-integrals identity per channel"});
    }

    const double scale = 1.0 + std::abs(est.risk);
    const double cert_slack = 0.5 * (prov.cert_gap_u + prov.cert_gap_v + prov.inner_fw_gap) +
                              0.5 * prov.delta_solver + 1e-9 * scale;

    {  // risk vs the saddle value: risk ~ psi_upper / 2 up to certified slack.
        const double resid = est.risk - 0.5 * prov.psi_upper;
        const bool certified = prov.constant_mode == "certified";
        const bool pass = certified ? std::abs(resid) <= cert_slack : resid >= -cert_slack;
        out.push_back({"risk_matches_saddle_value", pass, std::abs(resid),
                       certified ? "risk = psi_upper / 2 within certification slack"
                                 : "risk >= psi_upper / 2 within certification slack"});
    }

    {  // hard floor from the confidence term
        const double resid = est.alpha * std::log(2.0 / est.epsilon) - est.risk;
        out.push_back({"risk_floor_confidence_term", resid <= 1e-12 * scale, std::max(resid, 0.0),
                       "risk >= alpha * ln(2/epsilon)"});
    }

    {  // hard floor from the saddle spread. Evaluating the two certification
        // maximizations at x*, y* themselves (their warm starts) and using
        // T(mu; mu, nu) = affinity gives the unconditional identity
        //   risk >= (g.x* - g.y*)/2 + alpha (ln(2/eps) + sum_l R_l ln Aff_l),
        // valid at any alpha; the affinity surplus vanishes only at the
        // exact optimizer of the outer search.
        double aff_term = 0.0;
        for (const auto& ch : est.channels) {
            aff_term += ch.repetitions * log_affinity(ch.family, ch.mu_star, ch.nu_star);
        }
        const double floor = 0.5 * (est.g_x_star - est.g_y_star) +
                             est.alpha * (std::log(2.0 / est.epsilon) + aff_term);
        const double resid = floor - est.risk;
        out.push_back({"risk_floor_spread", resid <= 1e-9 * scale, std::max(resid, 0.0),
                       "risk >= (g.x* - g.y*)/2 + alpha (ln(2/eps) + affinity surplus)"});
    }

    {  // the two constant constructions agree at an exact saddle
        const double resid = std::abs(prov.constant_certified - prov.constant_closed_form);
        out.push_back({"constants_agree", resid <= cert_slack + 1e-6 * scale, resid,
                       "certified and closed-form constants within certification slack"});
    }

    {  // channel parameters strictly inside their domains
        bool ok = true;
        std::string detail = "mu*, nu* strictly inside the family domains";
        for (std::size_t l = 0; l < est.channels.size(); ++l) {
            try {
                check_params(est.channels[l].family, est.channels[l].mu_star);
                check_params(est.channels[l].family, est.channels[l].nu_star);
            } catch (const std::domain_error& e) {
                ok = false;
                detail = "channel " + std::to_string(l) + ": " + e.what();
            }
        }
        out.push_back({"params_in_domain", ok, ok ? 0.0 : 1.0, detail});
    }

    {  // bracket sanity
        const double resid = prov.psi_lower - prov.psi_upper;
        out.push_back({"psi_bracket_ordered", resid <= 0.0, std::max(resid, 0.0),
                       "psi_lower <= psi_upper"});
    }

    {  // stored channel parameters reproduce the maps at the stored saddle states
        bool ok = est.channels.size() == spec.channels.size();
        double worst = ok ? 0.0 : 1.0;
        std::string detail = "mu* = A_l(x*), nu* = A_l(y*) per channel";
        if (!ok) {
            detail = "channel count differs from the problem model";
        } else {
            for (std::size_t l = 0; l < est.channels.size(); ++l) {
                const ChannelModel& ch = spec.channels[l];
                const double scale_l =
                    1.0 + std::max(est.channels[l].mu_star.lpNorm<Eigen::Infinity>(),
                                   est.channels[l].nu_star.lpNorm<Eigen::Infinity>());
                worst = std::max(
                    worst, (est.channels[l].mu_star - ch.map(prov.x_star)).lpNorm<Eigen::Infinity>() /
                               scale_l);
                worst = std::max(
                    worst, (est.channels[l].nu_star - ch.map(prov.y_star)).lpNorm<Eigen::Infinity>() /
                               scale_l);
            }
            ok = worst <= 1e-12;
        }
        out.push_back({"channels_match_saddle_states", ok, worst, detail});
    }

    return out;
}

}  // namespace affest
