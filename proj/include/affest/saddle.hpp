#pragma once

#include <vector>

#include "affest/problem.hpp"

// The optimization core. For a penalty weight alpha > 0 define over
// X x X the coupled objective
//
//   h_alpha(x, y) = g.(x - y) + 2 alpha sum_l R_l ln affinity_l(A_l(x), A_l(y))
//
// (R_l = repetitions, A_l = channel parameter map). h_alpha is concave in
// (x, y); its maximum is the inner value of
//
//   Psi(alpha) = 2 alpha r + max_{x,y in X} h_alpha(x, y),    r = ln(2/epsilon),
//
// which is convex in alpha. The estimator construction needs the minimizer
// alpha* of Psi and the corresponding maximizer pair (x*, y*); min Psi / 2
// is the certified worst-case risk. Inner maximizations run Frank-Wolfe
// with an exact concave line search and return a duality-gap certificate:
// the true maximum always lies in [value, value + fw_gap].

namespace affest {

struct InnerSolution {
    Vector x_star;
    Vector y_star;
    double value = 0.0;   // h_alpha(x_star, y_star)
    double fw_gap = 0.0;  // Frank-Wolfe gap at (x_star, y_star); max <= value + fw_gap
    int iterations = 0;
    bool converged = false;  // gap <= tol reached within the iteration cap
};

// Certified bracket for Psi(alpha): lower = 2 alpha r + value,
// upper = lower + fw_gap.
struct PsiBracket {
    double lower = 0.0;
    double upper = 0.0;
    InnerSolution inner;
};

struct AlphaTracePoint {
    double alpha;
    double psi_lower;
    double psi_upper;
};

struct SaddleSolution {
    double alpha_star = 0.0;
    InnerSolution inner;          // solution of the inner problem at alpha_star
    double psi_lower = 0.0;       // bracket for Psi(alpha_star)
    double psi_upper = 0.0;
    double r = 0.0;
    bool alpha_bound_active = false;  // alpha_star clamped to [alpha_min, alpha_max]
    bool inner_converged = true;      // inner solve at alpha_star met tol_inner
    // Conservative solver-precision estimate: inner gap at alpha_star plus
    // the Psi spread observed across the final search bracket.
    double delta_solver = 0.0;
    std::vector<AlphaTracePoint> trace;  // every (alpha, Psi bracket) evaluated, in order
};

// h_alpha and its gradient blocks (nabla_x, nabla_y). Throws
// std::domain_error if a mapped parameter leaves the family domain.
double coupled_objective(const ProblemSpec& spec, double alpha, const Vector& x,
                         const Vector& y);
std::pair<Vector, Vector> coupled_gradient(const ProblemSpec& spec, double alpha,
                                           const Vector& x, const Vector& y);

// Frank-Wolfe maximization of h_alpha over X x X (joint linear oracle on
// both blocks). Deterministic; warm-startable. Throws std::logic_error if
// a line search ever observes non-concave behaviour (model inconsistency).
InnerSolution maximize_inner(const ProblemSpec& spec, double alpha, double tol,
                             int max_iter);
InnerSolution maximize_inner(const ProblemSpec& spec, double alpha, double tol,
                             int max_iter, const Vector& x0, const Vector& y0);

// Psi(alpha) bracket from a cold-started inner solve, using the problem's
// solver tolerances. Asserts the invariant Psi(alpha) >= 2 alpha r (the
// inner maximum is >= 0 since h_alpha(x, x) = 0).
PsiBracket psi(const ProblemSpec& spec, double alpha);

// Golden-section minimization of Psi over log alpha in
// [alpha_min, alpha_max], warm-starting each inner solve from the previous
// one. Sets alpha_bound_active (and clamps) when the minimum sits at an
// endpoint of the search interval.
SaddleSolution minimize_alpha(const ProblemSpec& spec);

}  // namespace affest
