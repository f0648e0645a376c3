#include <doctest.h>

#include <cmath>
#include <random>

#include "fembem/errors.hpp"
#include "fembem/numerics.hpp"

using namespace fembem;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// int_T x^a y^b over the reference triangle.
double triangle_monomial(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

double apply(const QuadRule& r, int a, int b) {
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q)
        s += r.weights[q] * std::pow(r.points[q].x(), a) * std::pow(r.points[q].y(), b);
    return s;
}

}  // namespace

TEST_CASE("segment midpoint rule") {
    QuadRule r = gauss_rule(1, Element::Segment);
    REQUIRE(r.size() == 1);
    CHECK(r.weights[0] == doctest::Approx(1.0));
    CHECK(r.points[0].x() == doctest::Approx(0.5));
}

TEST_CASE("cubic on the segment with an order-3 rule") {
    QuadRule r = gauss_rule(3, Element::Segment);
    CHECK(std::abs(apply(r, 3, 0) - 0.25) < 1e-15);
}

TEST_CASE("segment rules are exact up to their order") {
    for (int order = 1; order <= 30; ++order) {
        QuadRule r = gauss_rule(order, Element::Segment);
        double wsum = 0.0;
        for (double w : r.weights) wsum += w;
        CHECK(std::abs(wsum - 1.0) < 1e-14);
        for (int a = 0; a <= order; ++a) {
            double exact = 1.0 / (a + 1);
            CHECK(std::abs(apply(r, a, 0) - exact) <= 1e-13 * exact);
        }
    }
}

TEST_CASE("triangle rules are exact up to their order") {
    for (int order = 1; order <= 20; ++order) {
        QuadRule r = gauss_rule(order, Element::Triangle);
        CHECK(std::abs(apply(r, 0, 0) - 0.5) < 1e-14);
        for (int a = 0; a <= order; ++a)
            for (int b = 0; a + b <= order; ++b) {
                double exact = triangle_monomial(a, b);
                CHECK(std::abs(apply(r, a, b) - exact) <= 1e-13 * exact);
            }
    }
}

TEST_CASE("unsupported orders are configuration errors") {
    CHECK_THROWS_AS(gauss_rule(0, Element::Segment), ConfigError);
    CHECK_THROWS_AS(gauss_rule(200, Element::Triangle), ConfigError);
    CHECK_THROWS_AS(gauss_legendre(0), ConfigError);
}

TEST_CASE("graded rule integrates log endpoint singularities") {
    QuadRule r = graded_segment_rule(8, 6);
    double s = 0.0, w = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) {
        double x = r.points[q].x();
        s += r.weights[q] * (std::log(x) + std::log(1.0 - x));
        w += r.weights[q];
    }
    CHECK(std::abs(w - 1.0) < 1e-14);
    CHECK(std::abs(s + 2.0) < 1e-6);
}

TEST_CASE("duffy rule integrates 1/r at the origin vertex") {
    // int_T 1/|x| over the reference triangle = sqrt 2 ln(1 + sqrt 2)
    QuadRule r = duffy_rule(20);
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] / r.points[q].norm();
    CHECK(std::abs(s - std::sqrt(2.0) * std::log(1.0 + std::sqrt(2.0))) < 1e-12);
}

TEST_CASE("solve_spd small systems") {
    SparseSystem id{SpMat(3, 3), Vec(3)};
    id.A.setIdentity();
    id.b << 1.0, -2.0, 3.5;
    CHECK((solve_spd(id) - id.b).norm() < 1e-14);

    SparseSystem d{SpMat(2, 2), Vec(2)};
    d.A.insert(0, 0) = 2.0;
    d.A.insert(1, 1) = 4.0;
    d.b << 2.0, 4.0;
    Vec x = solve_spd(d);
    CHECK(x(0) == doctest::Approx(1.0));
    CHECK(x(1) == doctest::Approx(1.0));

    SparseSystem lap{SpMat(4, 4), Vec::Ones(4)};
    std::vector<Triplet> t;
    for (int i = 0; i < 4; ++i) {
        t.emplace_back(i, i, 2.0);
        if (i > 0) t.emplace_back(i, i - 1, -1.0);
        if (i < 3) t.emplace_back(i, i + 1, -1.0);
    }
    lap.A.setFromTriplets(t.begin(), t.end());
    Vec y = solve_spd(lap);
    Vec expected(4);
    expected << 2, 3, 3, 2;
    CHECK((y - expected).norm() < 1e-12);
}

TEST_CASE("solve_spd residual contract on random SPD systems") {
    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 100; ++trial) {
        int n = 2 + trial % 15;
        Mat B(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) B(i, j) = nd(rng);
        Mat A = B.transpose() * B + Mat::Identity(n, n);
        Vec b(n);
        for (int i = 0; i < n; ++i) b(i) = nd(rng);
        SparseSystem s{A.sparseView(), b};
        Vec x = solve_spd(s);
        CHECK((A * x - b).norm() <= 1e-10 * b.norm());
    }
}

TEST_CASE("solve_spd rejects an indefinite matrix") {
    SparseSystem s{SpMat(2, 2), Vec::Ones(2)};
    s.A.insert(0, 0) = 1.0;
    s.A.insert(1, 1) = -1.0;
    CHECK_THROWS_AS(solve_spd(s), SolverError);
}

TEST_CASE("saddle solver") {
    SUBCASE("A = I, B = 0, C = I") {
        Vec f(2), g(1);
        f << 1.5, -2.0;
        g << 3.0;
        SaddleSolution s = solve_saddle_dense(Mat::Identity(2, 2), Mat::Zero(1, 2), f, g, Mat::Identity(1, 1));
        CHECK((s.primal - f).norm() < 1e-15);
        CHECK((s.multiplier - g).norm() < 1e-15);
    }
    SUBCASE("A = I, B = (1 1), C = 0") {
        Mat B(1, 2);
        B << 1, 1;
        Vec g(1);
        g << 2.0;
        SaddleSolution s = solve_saddle_dense(Mat::Identity(2, 2), B, Vec::Zero(2), g);
        CHECK(s.primal(0) == doctest::Approx(1.0));
        CHECK(s.primal(1) == doctest::Approx(1.0));
        CHECK(s.multiplier(0) == doctest::Approx(-1.0));
    }
    SUBCASE("zero row of B without stabilization is singular") {
        Mat B(2, 2);
        B << 1, 0, 0, 0;
        CHECK_THROWS_AS(solve_saddle_dense(Mat::Identity(2, 2), B, Vec::Zero(2), Vec::Ones(2)), SolverError);
    }
}
