#include <doctest.h>

#include <cmath>

#include "mdra/analysis.hpp"
#include "mdra/common.hpp"

using namespace mdra;

namespace {

double embedded_dist(const Mat& c, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t a = 0; a < c.cols; ++a) {
        const double d = c(i, a) - c(j, a);
        acc += d * d;
    }
    return std::sqrt(acc);
}

double input_dist(const Mat& p, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t a = 0; a < p.cols; ++a) {
        const double d = p(i, a) - p(j, a);
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("assign_and_mass: frequencies, ties, equivariance") {
    Mat binary(5, 3, 0.0);
    binary(0, 1) = 1.0;
    binary(1, 1) = 1.0;
    binary(2, 0) = 1.0;
    binary(3, 2) = 1.0;
    binary(4, 1) = 1.0;
    const auto [assign, masses] = assign_and_mass(binary);
    CHECK(assign == std::vector<std::size_t>{1, 1, 0, 2, 1});
    CHECK(masses[0] == doctest::Approx(0.2));
    CHECK(masses[1] == doctest::Approx(0.6));
    CHECK(masses[2] == doctest::Approx(0.2));

    const Mat uniform(4, 3, 1.0 / 3.0);
    const auto [ua, um] = assign_and_mass(uniform);
    for (std::size_t a : ua) CHECK(a == 0);  // ties take the lowest index
    for (double m : um) CHECK(m == doctest::Approx(1.0 / 3.0));

    // permuting columns permutes the masses the same way
    Mat permuted(5, 3);
    for (std::size_t n = 0; n < 5; ++n) {
        permuted(n, 0) = binary(n, 2);
        permuted(n, 1) = binary(n, 0);
        permuted(n, 2) = binary(n, 1);
    }
    const auto [pa, pm] = assign_and_mass(permuted);
    CHECK(pm[0] == doctest::Approx(masses[2]));
    CHECK(pm[1] == doctest::Approx(masses[0]));
    CHECK(pm[2] == doctest::Approx(masses[1]));
}

TEST_CASE("purity: exact cases and relabeling invariance") {
    CHECK(purity({0, 1, 2}, {"a", "b", "c"}) == doctest::Approx(1.0));
    CHECK(purity({0, 0, 0, 0}, {"a", "a", "b", "b"}) == doctest::Approx(0.5));
    // clusters {A,A,B} and {B,B,B}: (2 + 3) / 6
    CHECK(purity({0, 0, 0, 1, 1, 1}, {"A", "A", "B", "B", "B", "B"}) ==
          doctest::Approx(5.0 / 6.0));
    // renaming cluster indices changes nothing
    CHECK(purity({7, 7, 7, 2, 2, 2}, {"A", "A", "B", "B", "B", "B"}) ==
          doctest::Approx(5.0 / 6.0));
    CHECK_THROWS_AS(purity({}, {}), DomainError);
    CHECK_THROWS_AS(purity({0, 1}, {"a"}), ShapeError);
}

TEST_CASE("classical_mds: two points embed at +-d/2") {
    Mat points(2, 3, 0.0);
    points(1, 0) = 3.0;
    points(1, 1) = 4.0;  // distance 5
    const MdsResult res = classical_mds(points, 1);
    CHECK(res.positive_axes == 1);
    CHECK(res.coords(0, 0) == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(res.coords(1, 0) == doctest::Approx(-2.5).epsilon(1e-10));
}

TEST_CASE("classical_mds: identical points give all-zero coordinates") {
    Mat points(4, 2, 1.7);
    const MdsResult res = classical_mds(points, 2);
    CHECK(res.positive_axes == 0);
    for (double v : res.coords.data) CHECK(v == 0.0);
}

TEST_CASE("classical_mds: equilateral triangle preserves side lengths") {
    Mat tri(3, 2, 0.0);
    tri(1, 0) = 1.0;
    tri(2, 0) = 0.5;
    tri(2, 1) = std::sqrt(3.0) / 2.0;
    const MdsResult res = classical_mds(tri, 2);
    CHECK(res.positive_axes == 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            CHECK(embedded_dist(res.coords, i, j) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("classical_mds: exact recovery of planar configurations in any ambient dim") {
    Rng rng(4);
    Mat plane(12, 2);
    for (double& v : plane.data) v = rng.uniform(-2.0, 2.0);
    // rotate the plane into 5 dimensions
    Mat lifted(12, 5, 0.0);
    for (std::size_t i = 0; i < 12; ++i) {
        lifted(i, 0) = 0.6 * plane(i, 0) + 0.8 * plane(i, 1);
        lifted(i, 2) = -0.8 * plane(i, 0) + 0.6 * plane(i, 1);
        lifted(i, 4) = 0.5;  // constant offset, distance-neutral
    }
    const MdsResult res = classical_mds(lifted, 2);
    CHECK(res.positive_axes == 2);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = i + 1; j < 12; ++j)
            CHECK(embedded_dist(res.coords, i, j) ==
                  doctest::Approx(input_dist(lifted, i, j)).epsilon(1e-8));
}

TEST_CASE("classical_mds: rank-deficient input zero-pads the missing axes") {
    Mat line(5, 1);
    for (std::size_t i = 0; i < 5; ++i) line(i, 0) = static_cast<double>(i);
    const MdsResult res = classical_mds(line, 3);
    CHECK(res.positive_axes == 1);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(res.coords(i, 1) == 0.0);
        CHECK(res.coords(i, 2) == 0.0);
    }
    // the one real axis still preserves distances
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j)
            CHECK(embedded_dist(res.coords, i, j) ==
                  doctest::Approx(input_dist(line, i, j)).epsilon(1e-8));
    // sign convention: first nonzero coordinate of the axis is positive
    CHECK(res.coords(0, 0) > 0.0);

    CHECK_THROWS_AS(classical_mds(line, 0), ConfigError);
    CHECK_THROWS_AS(classical_mds(Mat(2, 1, 0.0), 3), ConfigError);
}

TEST_CASE("complex_rows_to_real splits re/im") {
    CMat H(2, 2);
    H(0, 0) = cx(1.0, -2.0);
    H(0, 1) = cx(3.0, 4.0);
    H(1, 0) = cx(0.0, 0.5);
    H(1, 1) = cx(-1.0, 0.0);
    const Mat r = complex_rows_to_real(H);
    CHECK(r.rows == 2);
    CHECK(r.cols == 4);
    CHECK(r(0, 0) == 1.0);
    CHECK(r(0, 1) == 3.0);
    CHECK(r(0, 2) == -2.0);
    CHECK(r(0, 3) == 4.0);
    CHECK(r(1, 2) == 0.5);
}

TEST_CASE("build_report: purity only with labels, embedding only when asked") {
    Mat R(4, 2);
    R(0, 0) = 0.9;
    R(0, 1) = 0.1;
    R(1, 0) = 0.8;
    R(1, 1) = 0.2;
    R(2, 0) = 0.2;
    R(2, 1) = 0.8;
    R(3, 0) = 0.1;
    R(3, 1) = 0.9;

    const ClusterReport bare = build_report(R, {}, 0);
    CHECK(!bare.purity.has_value());
    CHECK(!bare.embedding.has_value());
    CHECK(bare.assignments == std::vector<std::size_t>{0, 0, 1, 1});
    double total = 0.0;
    for (double m : bare.masses) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

    const ClusterReport labeled = build_report(R, {"x", "x", "y", "y"}, 2);
    REQUIRE(labeled.purity.has_value());
    CHECK(*labeled.purity == doctest::Approx(1.0));
    REQUIRE(labeled.embedding.has_value());
    CHECK(labeled.embedding->rows == 4);
    CHECK(labeled.embedding->cols == 2);
}
