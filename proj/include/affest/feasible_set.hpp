#pragma once

#include <random>
#include <variant>
#include <vector>

#include "affest/common.hpp"

// Compact convex feasible sets for the unknown state, together with the
// primitives the optimizer needs: linear minimization oracle (LMO),
// Euclidean projection, extreme points, membership and interior points.

namespace affest {

// Axis-aligned box { x : lower <= x <= upper }, lower < upper componentwise.
struct Box {
    Vector lower;
    Vector upper;
};

// Scaled simplex with a floor: { x : x_i >= floor, sum_i x_i = total }.
struct Simplex {
    int dim = 0;
    double floor = 0.0;
    double total = 1.0;
};

// Convex hull of an explicit vertex list.
struct Polytope {
    std::vector<Vector> vertices;
};

using FeasibleSet = std::variant<Box, Simplex, Polytope>;

// Dimension of the ambient space the set lives in.
int ambient_dim(const FeasibleSet& set);

// Throws std::invalid_argument if the description is malformed (empty
// bounds, lower >= upper, dim*floor >= total, no vertices, ...).
void check_valid(const FeasibleSet& set);

// argmax_{v in set} direction . v, attained at an extreme point.
// Tie-breaking is deterministic: boxes take the lower bound when a
// coordinate of `direction` is zero; simplexes put the free mass on the
// first coordinate attaining the max; polytopes take the first vertex
// attaining the max.
Vector lmo(const FeasibleSet& set, const Vector& direction);

// max_{v in set} direction . v (support function).
double support(const FeasibleSet& set, const Vector& direction);

// Euclidean projection onto the set.
Vector project(const FeasibleSet& set, const Vector& point);

// Explicit vertex enumeration. Boxes are limited to 20 dimensions (2^20
// corners); beyond that a std::domain_error asks the caller to use
// support-function queries instead. Polytopes return their vertex list
// unchanged.
std::vector<Vector> extreme_points(const FeasibleSet& set);

// A point in the relative interior (box center / uniform simplex point /
// vertex average).
Vector interior_point(const FeasibleSet& set);

// Membership test with tolerance `tol` (absolute, scaled by the set size
// where appropriate).
bool contains(const FeasibleSet& set, const Vector& point, double tol = 1e-9);

// Random element of the set (uniform for boxes, flat Dirichlet weights for
// simplexes and polytopes). Used to generate probe states.
Vector sample_point(const FeasibleSet& set, std::mt19937_64& rng);

}  // namespace affest
