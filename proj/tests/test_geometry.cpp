#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "affest/feasible_set.hpp"
#include "affest/rng.hpp"

using namespace affest;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<int>(v.size()));
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

const Box unit_box2{vec({0.0, 0.0}), vec({1.0, 1.0})};
const Simplex simplex3{3, 0.0, 1.0};
const Polytope triangle{{vec({0.0, 0.0}), vec({1.0, 0.0}), vec({0.0, 1.0})}};

}  // namespace

TEST_CASE("lmo picks the maximizing extreme point") {
    // box: positive components go to the upper bound, zero components to the lower
    CHECK((lmo(FeasibleSet{unit_box2}, vec({1.0, -1.0})) - vec({1.0, 0.0})).norm() == 0.0);
    CHECK((lmo(FeasibleSet{unit_box2}, vec({0.0, 0.0})) - vec({0.0, 0.0})).norm() == 0.0);

    // simplex: free mass on the first coordinate attaining the max
    const FeasibleSet s{simplex3};
    CHECK((lmo(s, vec({1.0, 2.0, 2.0})) - vec({0.0, 1.0, 0.0})).norm() == 0.0);

    // polytope: first vertex attaining the max
    const FeasibleSet p{Polytope{{vec({0.0, 1.0}), vec({1.0, 0.0}), vec({0.0, 1.0})}}};
    CHECK((lmo(p, vec({0.0, 1.0})) - vec({0.0, 1.0})).norm() == 0.0);
}

TEST_CASE("lmo dominates every extreme point (seeded directions)") {
    const FeasibleSet sets[] = {FeasibleSet{Box{vec({-1.0, 0.5, 2.0}), vec({1.0, 2.0, 3.0})}},
                                FeasibleSet{Simplex{4, 0.05, 1.0}}, FeasibleSet{triangle}};
    std::mt19937_64 rng = make_stream(11, 0);
    for (const auto& set : sets) {
        const auto verts = extreme_points(set);
        for (int trial = 0; trial < 100; ++trial) {
            Vector d(ambient_dim(set));
            for (int i = 0; i < d.size(); ++i) d[i] = 2.0 * uniform01(rng) - 1.0;
            const double best = d.dot(lmo(set, d));
            for (const auto& v : verts) CHECK(best >= d.dot(v) - 1e-12);
        }
    }
}

TEST_CASE("projection: boxes clamp") {
    const FeasibleSet b{unit_box2};
    CHECK((project(b, vec({2.0, -1.0})) - vec({1.0, 0.0})).norm() == 0.0);
    CHECK((project(b, vec({0.3, 0.7})) - vec({0.3, 0.7})).norm() == 0.0);
}

TEST_CASE("projection: simplex sort-based result") {
    const FeasibleSet s{Simplex{2, 0.0, 1.0}};
    const Vector p = project(s, vec({0.8, 0.8}));
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));

    // with a floor: shift, project, shift back
    const FeasibleSet sf{Simplex{3, 0.1, 1.0}};
    const Vector q = project(sf, vec({1.0, 0.0, 0.0}));
    CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q.minCoeff() >= 0.1 - 1e-12);
}

TEST_CASE("projection satisfies the variational inequality") {
    // <p - proj(p), v - proj(p)> <= 0 for all extreme points v characterizes
    // the Euclidean projection onto a convex set.
    const FeasibleSet sets[] = {FeasibleSet{Box{vec({-1.0, -1.0}), vec({1.0, 2.0})}},
                                FeasibleSet{Simplex{4, 0.02, 2.0}}, FeasibleSet{triangle}};
    std::mt19937_64 rng = make_stream(12, 0);
    for (const auto& set : sets) {
        const auto verts = extreme_points(set);
        for (int trial = 0; trial < 50; ++trial) {
            Vector p(ambient_dim(set));
            for (int i = 0; i < p.size(); ++i) p[i] = -3.0 + 6.0 * uniform01(rng);
            const Vector pr = project(set, p);
            CHECK(contains(set, pr, 1e-8));
            for (const auto& v : verts) CHECK((p - pr).dot(v - pr) <= 1e-9);
            // idempotence
            CHECK((project(set, pr) - pr).norm() <= 1e-9);
        }
    }
}

TEST_CASE("extreme points") {
    const auto corners = extreme_points(FeasibleSet{Box{vec({0.0}), vec({1.0})}});
    REQUIRE(corners.size() == 2);
    CHECK(corners[0][0] == 0.0);
    CHECK(corners[1][0] == 1.0);

    const auto sv = extreme_points(FeasibleSet{Simplex{3, 0.1, 1.0}});
    REQUIRE(sv.size() == 3);
    CHECK((sv[0] - vec({0.8, 0.1, 0.1})).norm() <= 1e-15);

    // polytopes return their vertex list unchanged
    const auto pv = extreme_points(FeasibleSet{triangle});
    CHECK(pv.size() == 3);

    // corner enumeration refuses intractable dimensions
    Box big{Vector::Zero(21), Vector::Ones(21)};
    CHECK_THROWS_AS((void)extreme_points(FeasibleSet{big}), std::domain_error);
}

TEST_CASE("interior points and membership") {
    const FeasibleSet b{unit_box2};
    CHECK(contains(b, interior_point(b)));
    CHECK(contains(b, vec({0.0, 1.0})));
    CHECK(!contains(b, vec({1.1, 0.5})));

    const FeasibleSet s{simplex3};
    const Vector c = interior_point(s);
    CHECK(c.sum() == doctest::Approx(1.0));
    CHECK(!contains(s, vec({0.5, 0.5, 0.5})));

    const FeasibleSet t{triangle};
    CHECK(contains(t, interior_point(t)));
    CHECK(!contains(t, vec({0.8, 0.8})));

    // singleton polytope: every primitive degenerates to the vertex
    const FeasibleSet single{Polytope{{vec({0.3, 0.7})}}};
    CHECK((interior_point(single) - vec({0.3, 0.7})).norm() == 0.0);
    CHECK((lmo(single, vec({-5.0, 2.0})) - vec({0.3, 0.7})).norm() == 0.0);
    CHECK((project(single, vec({9.0, 9.0})) - vec({0.3, 0.7})).norm() == 0.0);
}

TEST_CASE("sampled points stay inside the set") {
    const FeasibleSet sets[] = {FeasibleSet{Box{vec({-2.0, 1.0}), vec({-1.0, 4.0})}},
                                FeasibleSet{Simplex{3, 0.05, 1.0}}, FeasibleSet{triangle}};
    std::mt19937_64 rng = make_stream(13, 0);
    for (const auto& set : sets)
        for (int i = 0; i < 100; ++i) CHECK(contains(set, sample_point(set, rng), 1e-9));
}

TEST_CASE("support function agrees with vertex enumeration") {
    const FeasibleSet s{Simplex{3, 0.1, 2.0}};
    std::mt19937_64 rng = make_stream(14, 0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector d(3);
        for (int i = 0; i < 3; ++i) d[i] = 2.0 * uniform01(rng) - 1.0;
        double best = -1e300;
        for (const auto& v : extreme_points(s)) best = std::max(best, d.dot(v));
        CHECK(support(s, d) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("malformed sets are rejected") {
    CHECK_THROWS_AS(check_valid(FeasibleSet{Box{vec({1.0}), vec({1.0})}}), std::invalid_argument);
    CHECK_THROWS_AS(check_valid(FeasibleSet{Box{vec({0.0, 0.0}), vec({1.0})}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(check_valid(FeasibleSet{Simplex{3, 0.4, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(check_valid(FeasibleSet{Simplex{0, 0.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(check_valid(FeasibleSet{Polytope{}}), std::invalid_argument);
    CHECK_NOTHROW(check_valid(FeasibleSet{simplex3}));
}
