#include "affest/feasible_set.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "affest/rng.hpp"

namespace affest {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Projection of z onto { w >= 0, sum w = budget } by the sort-and-threshold
// method: theta is the unique shift with sum max(z - theta, 0) = budget.
Vector project_nonneg_sum(const Vector& z, double budget) {
    const int n = static_cast<int>(z.size());
    std::vector<double> u(z.data(), z.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (int j = 0; j < n; ++j) {
        cumulative += u[j];
        const double candidate = (cumulative - budget) / (j + 1);
        if (j + 1 == n || u[j + 1] <= candidate) {
            theta = candidate;
            break;
        }
    }
    return (z.array() - theta).cwiseMax(0.0).matrix();
}

double set_scale(const FeasibleSet& set) {
    return std::visit(
        overloaded{
            [](const Box& b) { return std::max(b.lower.cwiseAbs().maxCoeff(), b.upper.cwiseAbs().maxCoeff()); },
            [](const Simplex& s) { return std::max(std::abs(s.total), 1.0); },
            [](const Polytope& p) {
                double m = 0.0;
                for (const auto& v : p.vertices) m = std::max(m, v.cwiseAbs().maxCoeff());
                return m;
            }},
        set);
}

}  // namespace

int ambient_dim(const FeasibleSet& set) {
    return std::visit(overloaded{[](const Box& b) { return static_cast<int>(b.lower.size()); },
                                 [](const Simplex& s) { return s.dim; },
                                 [](const Polytope& p) {
                                     return p.vertices.empty() ? 0
                                                               : static_cast<int>(p.vertices.front().size());
                                 }},
                      set);
}

void check_valid(const FeasibleSet& set) {
    std::visit(overloaded{
                   [](const Box& b) {
                       if (b.lower.size() == 0) throw std::invalid_argument("box: empty bounds");
                       if (b.lower.size() != b.upper.size())
                           throw std::invalid_argument("box: lower/upper dimension mismatch");
                       for (int i = 0; i < b.lower.size(); ++i) {
                           if (!(b.lower[i] < b.upper[i]))
                               throw std::invalid_argument("box: requires lower < upper in every coordinate");
                           if (!std::isfinite(b.lower[i]) || !std::isfinite(b.upper[i]))
                               throw std::invalid_argument("box: bounds must be finite");
                       }
                   },
                   [](const Simplex& s) {
                       if (s.dim < 1) throw std::invalid_argument("simplex: dim must be >= 1");
                       if (!(s.floor >= 0.0)) throw std::invalid_argument("simplex: floor must be >= 0");
                       if (!(s.total > 0.0)) throw std::invalid_argument("simplex: total must be > 0");
                       if (!(s.dim * s.floor < s.total))
                           throw std::invalid_argument("simplex: requires dim * floor < total");
                   },
                   [](const Polytope& p) {
                       if (p.vertices.empty()) throw std::invalid_argument("polytope: needs at least one vertex");
                       const auto d = p.vertices.front().size();
                       if (d == 0) throw std::invalid_argument("polytope: vertices must be non-empty vectors");
                       for (const auto& v : p.vertices) {
                           if (v.size() != d)
                               throw std::invalid_argument("polytope: vertices have inconsistent dimensions");
                           for (int i = 0; i < v.size(); ++i)
                               if (!std::isfinite(v[i]))
                                   throw std::invalid_argument("polytope: vertex coordinates must be finite");
                       }
                   }},
               set);
}

Vector lmo(const FeasibleSet& set, const Vector& direction) {
    if (direction.size() != ambient_dim(set))
        throw std::invalid_argument("lmo: direction dimension mismatch");
    return std::visit(
        overloaded{
            [&](const Box& b) {
                Vector v(b.lower.size());
                // Zero components take the lower bound (deterministic tie-break).
                for (int i = 0; i < v.size(); ++i) v[i] = direction[i] > 0.0 ? b.upper[i] : b.lower[i];
                return v;
            },
            [&](const Simplex& s) {
                int best = 0;
                for (int i = 1; i < s.dim; ++i)
                    if (direction[i] > direction[best]) best = i;  // first max wins
                Vector v = Vector::Constant(s.dim, s.floor);
                v[best] += s.total - s.dim * s.floor;
                return v;
            },
            [&](const Polytope& p) {
                int best = 0;
                double best_val = direction.dot(p.vertices[0]);
                for (std::size_t i = 1; i < p.vertices.size(); ++i) {
                    const double val = direction.dot(p.vertices[i]);
                    if (val > best_val) {
                        best_val = val;
                        best = static_cast<int>(i);
                    }
                }
                return p.vertices[best];
            }},
        set);
}

double support(const FeasibleSet& set, const Vector& direction) {
    return direction.dot(lmo(set, direction));
}

Vector project(const FeasibleSet& set, const Vector& point) {
    if (point.size() != ambient_dim(set))
        throw std::invalid_argument("project: point dimension mismatch");
    return std::visit(
        overloaded{
            [&](const Box& b) -> Vector { return point.cwiseMax(b.lower).cwiseMin(b.upper); },
            [&](const Simplex& s) -> Vector {
                // Shift the floor out, project onto the scaled standard
                // simplex, shift back.
                const double budget = s.total - s.dim * s.floor;
                const Vector z = point.array() - s.floor;
                return (project_nonneg_sum(z, budget).array() + s.floor).matrix();
            },
            [&](const Polytope& p) -> Vector {
                const int k = static_cast<int>(p.vertices.size());
                if (k == 1) return p.vertices[0];
                const int n = static_cast<int>(p.vertices[0].size());
                Matrix V(n, k);
                for (int j = 0; j < k; ++j) V.col(j) = p.vertices[j];
                // Accelerated projected gradient on the vertex weights:
                // minimize 1/2 |V w - point|^2 over the probability simplex.
                const Matrix G = V.transpose() * V;
                const Vector q = V.transpose() * point;
                Eigen::SelfAdjointEigenSolver<Matrix> es(G);
                const double L = std::max(es.eigenvalues().maxCoeff(), 1e-300);
                Vector w = Vector::Constant(k, 1.0 / k);
                Vector w_prev = w;
                double t_prev = 1.0;
                const double stop = 1e-14 * std::max(1.0, point.norm());
                for (int it = 0; it < 20000; ++it) {
                    // Stop on the plain (non-accelerated) step: its fixed
                    // points are exactly the minimizers, whereas the momentum
                    // iterate can reproduce w at a non-stationary point and
                    // fool a movement-based test.
                    const Vector w_plain = project_nonneg_sum(w - (G * w - q) / L, 1.0);
                    if ((w_plain - w).lpNorm<Eigen::Infinity>() < stop) {
                        w = w_plain;
                        break;
                    }
                    const double t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
                    const Vector z = w + ((t_prev - 1.0) / t) * (w - w_prev);
                    Vector w_next = project_nonneg_sum(z - (G * z - q) / L, 1.0);
                    // Restart when the momentum direction opposes the step.
                    if ((z - w_next).dot(w_next - w) > 0.0) {
                        w_next = w_plain;
                        t_prev = 1.0;
                    } else {
                        t_prev = t;
                    }
                    w_prev = w;
                    w = w_next;
                }
                return V * w;
            }},
        set);
}

std::vector<Vector> extreme_points(const FeasibleSet& set) {
    return std::visit(
        overloaded{
            [](const Box& b) {
                const int n = static_cast<int>(b.lower.size());
                if (n > 20)
                    throw std::domain_error(
                        "extreme_points: box dimension exceeds 20; corner enumeration is "
                        "intractable, query the support function instead");
                std::vector<Vector> pts;
                pts.reserve(std::size_t{1} << n);
                for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
                    Vector v(n);
                    for (int i = 0; i < n; ++i) v[i] = (mask >> i) & 1 ? b.upper[i] : b.lower[i];
                    pts.push_back(std::move(v));
                }
                return pts;
            },
            [](const Simplex& s) {
                std::vector<Vector> pts;
                pts.reserve(s.dim);
                const double extra = s.total - s.dim * s.floor;
                for (int i = 0; i < s.dim; ++i) {
                    Vector v = Vector::Constant(s.dim, s.floor);
                    v[i] += extra;
                    pts.push_back(std::move(v));
                }
                return pts;
            },
            [](const Polytope& p) { return p.vertices; }},
        set);
}

Vector interior_point(const FeasibleSet& set) {
    return std::visit(overloaded{[](const Box& b) -> Vector { return 0.5 * (b.lower + b.upper); },
                                 [](const Simplex& s) -> Vector {
                                     return Vector::Constant(s.dim, s.total / s.dim);
                                 },
                                 [](const Polytope& p) -> Vector {
                                     Vector c = Vector::Zero(p.vertices[0].size());
                                     for (const auto& v : p.vertices) c += v;
                                     return c / static_cast<double>(p.vertices.size());
                                 }},
                      set);
}

bool contains(const FeasibleSet& set, const Vector& point, double tol) {
    if (point.size() != ambient_dim(set)) return false;
    const double scaled = tol * std::max(1.0, set_scale(set));
    return std::visit(
        overloaded{
            [&](const Box& b) {
                return ((point - b.lower).minCoeff() >= -scaled) &&
                       ((b.upper - point).minCoeff() >= -scaled);
            },
            [&](const Simplex& s) {
                return (point.minCoeff() >= s.floor - scaled) &&
                       (std::abs(point.sum() - s.total) <= scaled);
            },
            [&](const Polytope&) { return (project(set, point) - point).norm() <= scaled; }},
        set);
}

Vector sample_point(const FeasibleSet& set, std::mt19937_64& rng) {
    return std::visit(
        overloaded{
            [&](const Box& b) {
                Vector v(b.lower.size());
                for (int i = 0; i < v.size(); ++i)
                    v[i] = b.lower[i] + uniform01(rng) * (b.upper[i] - b.lower[i]);
                return v;
            },
            [&](const Simplex& s) {
                // Flat Dirichlet over the free mass above the floor.
                Vector e(s.dim);
                for (int i = 0; i < s.dim; ++i) e[i] = -std::log(uniform01(rng));
                e *= (s.total - s.dim * s.floor) / e.sum();
                return (e.array() + s.floor).matrix().eval();
            },
            [&](const Polytope& p) {
                const int k = static_cast<int>(p.vertices.size());
                Vector w(k);
                for (int i = 0; i < k; ++i) w[i] = -std::log(uniform01(rng));
                w /= w.sum();
                Vector v = Vector::Zero(p.vertices[0].size());
                for (int i = 0; i < k; ++i) v += w[i] * p.vertices[i];
                return v;
            }},
        set);
}

}  // namespace affest
