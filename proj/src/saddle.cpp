#include "affest/saddle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace affest {

namespace {

double total_repetitions(const ProblemSpec& spec) {
    double total = 0.0;
    for (const auto& ch : spec.channels) total += ch.repetitions;
    return total;
}

// The certificate says max h_alpha <= value + gap; the true maximum is >= 0
// because h_alpha vanishes on the diagonal. Tolerance scales with alpha
// because the affinity terms carry a 2 * alpha * R factor.
void check_nonnegative_max(const ProblemSpec& spec, double alpha, const InnerSolution& inner) {
    const double slack =
        1e-9 * (1.0 + std::abs(inner.value)) + 1e-12 * alpha * total_repetitions(spec);
    if (inner.value + inner.fw_gap < -slack)
        throw std::logic_error(
            "inner maximization certified a negative maximum, but the objective is zero on "
            "the diagonal — optimizer inconsistency");
}

// Exact maximization of the concave section t -> h(z + t d) on [0, 1] by
// bisecting the sign change of its derivative.
double exact_line_search(const ProblemSpec& spec, double alpha, const Vector& x,
                         const Vector& y, const Vector& dx, const Vector& dy) {
    const auto dphi = [&](double t) {
        const auto [gx, gy] = coupled_gradient(spec, alpha, x + t * dx, y + t * dy);
        return gx.dot(dx) + gy.dot(dy);
    };
    if (dphi(1.0) >= 0.0) return 1.0;  // still ascending at the far end
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (dphi(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double coupled_objective(const ProblemSpec& spec, double alpha, const Vector& x,
                         const Vector& y) {
    double total = spec.g.dot(x) - spec.g.dot(y);
    for (const auto& ch : spec.channels)
        total += 2.0 * alpha * ch.repetitions *
                 log_affinity(ch.family, ch.map(x), ch.map(y));
    return total;
}

std::pair<Vector, Vector> coupled_gradient(const ProblemSpec& spec, double alpha,
                                           const Vector& x, const Vector& y) {
    Vector gx = spec.g;
    Vector gy = -spec.g;
    for (const auto& ch : spec.channels) {
        const auto [dmu, dnu] = log_affinity_grad(ch.family, ch.map(x), ch.map(y));
        const double w = 2.0 * alpha * ch.repetitions;
        gx.noalias() += w * (ch.map_matrix.transpose() * dmu);
        gy.noalias() += w * (ch.map_matrix.transpose() * dnu);
    }
    return {gx, gy};
}

InnerSolution maximize_inner(const ProblemSpec& spec, double alpha, double tol, int max_iter,
                             const Vector& x0, const Vector& y0) {
    if (!(alpha > 0.0)) throw std::invalid_argument("maximize_inner: alpha must be > 0");
    const FeasibleSet& set = spec.feasible_set;
    Vector x = project(set, x0);
    Vector y = project(set, y0);
    double value = coupled_objective(spec, alpha, x, y);

    InnerSolution sol;
    for (int it = 0; it < max_iter; ++it) {
        const auto [gx, gy] = coupled_gradient(spec, alpha, x, y);
        const Vector sx = lmo(set, gx);
        const Vector sy = lmo(set, gy);
        const double gap = gx.dot(sx - x) + gy.dot(sy - y);
        if (gap <= tol) {
            sol = {x, y, value, std::max(gap, 0.0), it, true};
            return sol;
        }
        const Vector dx = sx - x;
        const Vector dy = sy - y;
        const double t = exact_line_search(spec, alpha, x, y, dx, dy);
        const Vector x_next = x + t * dx;
        const Vector y_next = y + t * dy;
        const double value_next = coupled_objective(spec, alpha, x_next, y_next);
        if (value_next < value - 1e-9 * (1.0 + std::abs(value)))
            throw std::logic_error(
                "inner maximization: objective decreased along a certified ascent direction — "
                "the coupled objective is not concave (model inconsistency)");
        if (value_next <= value) break;  // numerical plateau: nothing left to gain
        x = x_next;
        y = y_next;
        value = value_next;
        sol.iterations = it + 1;
    }

    // Iteration cap or plateau: report an honest certificate at the final iterate.
    const auto [gx, gy] = coupled_gradient(spec, alpha, x, y);
    const double gap = gx.dot(lmo(set, gx) - x) + gy.dot(lmo(set, gy) - y);
    sol.x_star = x;
    sol.y_star = y;
    sol.value = value;
    sol.fw_gap = std::max(gap, 0.0);
    sol.converged = gap <= tol;
    return sol;
}

InnerSolution maximize_inner(const ProblemSpec& spec, double alpha, double tol,
                             int max_iter) {
    const Vector start = interior_point(spec.feasible_set);
    return maximize_inner(spec, alpha, tol, max_iter, start, start);
}

PsiBracket psi(const ProblemSpec& spec, double alpha) {
    InnerSolution inner =
        maximize_inner(spec, alpha, spec.solver.tol_inner, spec.solver.max_iter_inner);
    check_nonnegative_max(spec, alpha, inner);
    const double base = 2.0 * alpha * spec.r();
    PsiBracket bracket;
    bracket.lower = base + inner.value;
    bracket.upper = base + inner.value + inner.fw_gap;
    bracket.inner = std::move(inner);
    return bracket;
}

SaddleSolution minimize_alpha(const ProblemSpec& spec) {
    const SolverConfig& cfg = spec.solver;
    const double r = spec.r();
    const double la = std::log(cfg.alpha_min);
    const double lb = std::log(cfg.alpha_max);

    SaddleSolution out;
    out.r = r;

    Vector wx = interior_point(spec.feasible_set);
    Vector wy = wx;

    struct Best {
        double alpha = 0.0;
        double s = 0.0;
        double lower = 0.0;
        double upper = std::numeric_limits<double>::infinity();
        InnerSolution inner;
    } best;

    // Evaluates the Psi bracket at a given alpha, warm-starting from the
    // previous evaluation. prefer_on_tie lets an exact endpoint re-evaluation
    // take over from an equal interior value so the clamp is clean.
    const auto eval = [&](double s, double alpha, bool prefer_on_tie) {
        InnerSolution inner =
            maximize_inner(spec, alpha, cfg.tol_inner, cfg.max_iter_inner, wx, wy);
        check_nonnegative_max(spec, alpha, inner);
        wx = inner.x_star;
        wy = inner.y_star;
        const double lower = 2.0 * alpha * r + inner.value;
        const double upper = lower + inner.fw_gap;
        out.trace.push_back({alpha, lower, upper});
        if (upper < best.upper || (prefer_on_tie && upper <= best.upper))
            best = {alpha, s, lower, upper, std::move(inner)};
        return upper;
    };

    constexpr double invphi = 0.61803398874989484820;  // (sqrt(5) - 1) / 2
    double a = la, b = lb;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = eval(c, std::exp(c), false);
    double fd = eval(d, std::exp(d), false);
    while (b - a > cfg.tol_alpha) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = eval(c, std::exp(c), false);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = eval(d, std::exp(d), false);
        }
    }

    // A bracket collapsed against an endpoint means the unconstrained
    // minimizer lies at or beyond the bound: clamp alpha* to the bound.
    const double edge_tol = 10.0 * cfg.tol_alpha;
    if (a <= la + edge_tol) {
        eval(la, cfg.alpha_min, true);
        if (best.alpha == cfg.alpha_min) out.alpha_bound_active = true;
    } else if (b >= lb - edge_tol) {
        eval(lb, cfg.alpha_max, true);
        if (best.alpha == cfg.alpha_max) out.alpha_bound_active = true;
    }

    out.alpha_star = best.alpha;
    out.inner = best.inner;
    out.psi_lower = best.lower;
    out.psi_upper = best.upper;
    out.inner_converged = best.inner.converged;

    // Precision estimate: the inner certificate gap at alpha*, plus the
    // spread of the Psi brackets observed across the final search interval.
    double hi = best.upper;
    double lo = best.lower;
    for (const auto& pt : out.trace) {
        const double s = std::log(pt.alpha);
        if (s >= a - 1e-12 && s <= b + 1e-12) {
            hi = std::max(hi, pt.psi_upper);
            lo = std::min(lo, pt.psi_lower);
        }
    }
    out.delta_solver = best.inner.fw_gap + (hi - lo);
    return out;
}

}  // namespace affest
