#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "raceline/spline.hpp"
#include "support.hpp"

using namespace raceline;

namespace {

// Textbook two-term recursion, written independently of the production
// evaluator so the two can cross-check each other.
double naive_basis(const std::vector<double>& t, int i, int p, double x) {
    if (p == 0) {
        bool last = x == t.back() && t[static_cast<size_t>(i + 1)] == t.back();
        return (t[static_cast<size_t>(i)] <= x &&
                (x < t[static_cast<size_t>(i + 1)] || last))
                   ? 1.0
                   : 0.0;
    }
    double left = 0.0, right = 0.0;
    double dl = t[static_cast<size_t>(i + p)] - t[static_cast<size_t>(i)];
    if (dl > 0.0) left = (x - t[static_cast<size_t>(i)]) / dl * naive_basis(t, i, p - 1, x);
    double dr = t[static_cast<size_t>(i + p + 1)] - t[static_cast<size_t>(i + 1)];
    if (dr > 0.0)
        right = (t[static_cast<size_t>(i + p + 1)] - x) / dr * naive_basis(t, i + 1, p - 1, x);
    return left + right;
}

std::vector<double> naive_row(const BSplineBasis& basis, double x) {
    std::vector<double> out(static_cast<size_t>(basis.dimension()));
    for (int i = 0; i < basis.dimension(); ++i)
        out[static_cast<size_t>(i)] = naive_basis(basis.knots(), i, basis.order() - 1, x);
    return out;
}

double binomial(int n, int k) {
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

}  // namespace

TEST_CASE("basis dimension counts interior knots plus order") {
    BSplineBasis basis{SplineSpec{}};
    REQUIRE(basis.dimension() == 9);
    REQUIRE(basis.order() == 4);
    REQUIRE(basis.knots().size() == 13);

    SplineSpec two;
    two.internal_knots = {400.0, 900.0};
    REQUIRE(BSplineBasis{two}.dimension() == 6);

    SplineSpec quad;
    quad.degree = 2;
    quad.internal_knots = {500.0};
    REQUIRE(BSplineBasis{quad}.dimension() == 4);
}

TEST_CASE("no interior knots degenerates to the Bernstein basis") {
    SplineSpec spec;
    spec.internal_knots.clear();
    BSplineBasis basis{spec};
    REQUIRE(basis.dimension() == 4);

    std::mt19937 gen(71);
    std::uniform_real_distribution<double> unif(0.0, 1650.0);
    for (int rep = 0; rep < 200; ++rep) {
        double x = unif(gen);
        double u = x / 1650.0;
        auto row = basis.row(x);
        for (int i = 0; i < 4; ++i) {
            double bern = binomial(3, i) * std::pow(u, i) * std::pow(1.0 - u, 3 - i);
            REQUIRE(row[static_cast<size_t>(i)] == Catch::Approx(bern).margin(1e-12));
        }
    }
}

TEST_CASE("row matches the two-term recursion everywhere") {
    BSplineBasis basis{SplineSpec{}};
    std::mt19937 gen(72);
    std::uniform_real_distribution<double> unif(0.0, 1650.0);
    std::vector<double> probes;
    for (int rep = 0; rep < 300; ++rep) probes.push_back(unif(gen));
    for (double k : {0.0, 90.0, 250.0, 800.0, 1207.0, 1375.0, 1650.0}) probes.push_back(k);
    for (double x : probes) {
        auto fast = basis.row(x);
        auto slow = naive_row(basis, x);
        for (size_t i = 0; i < fast.size(); ++i)
            REQUIRE(fast[i] == Catch::Approx(slow[i]).margin(1e-12));
    }
}

TEST_CASE("rows sum to one and touch at most four entries") {
    BSplineBasis basis{SplineSpec{}};
    std::mt19937 gen(73);
    std::uniform_real_distribution<double> unif(0.0, 1650.0);
    for (int rep = 0; rep < 1000; ++rep) {
        double x = unif(gen);
        auto row = basis.row(x);
        double sum = 0.0;
        int nonzero = 0;
        int first = -1, last = -1;
        for (size_t i = 0; i < row.size(); ++i) {
            REQUIRE(row[i] >= 0.0);
            sum += row[i];
            if (row[i] != 0.0) {
                if (first < 0) first = static_cast<int>(i);
                last = static_cast<int>(i);
                ++nonzero;
            }
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-10);
        REQUIRE(nonzero <= 4);
        REQUIRE(last - first <= 3);  // nonzeros are contiguous
    }
}

TEST_CASE("endpoint rows are unit vectors") {
    BSplineBasis basis{SplineSpec{}};
    auto at0 = basis.row(0.0);
    REQUIRE(at0[0] == 1.0);
    for (size_t i = 1; i < at0.size(); ++i) REQUIRE(at0[i] == 0.0);

    auto at_end = basis.row(1650.0);
    REQUIRE(at_end.back() == Catch::Approx(1.0).margin(1e-12));
    for (size_t i = 0; i + 1 < at_end.size(); ++i)
        REQUIRE(at_end[i] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("early distances only load the leading functions") {
    BSplineBasis basis{SplineSpec{}};
    auto row = basis.row(50.0);  // below the first interior knot
    for (size_t i = 4; i < row.size(); ++i) REQUIRE(row[i] == 0.0);
}

TEST_CASE("evaluation clamps past the upper boundary") {
    BSplineBasis basis{SplineSpec{}};
    auto edge = basis.row(1650.0);
    auto beyond = basis.row(1700.0);
    for (size_t i = 0; i < edge.size(); ++i) REQUIRE(beyond[i] == edge[i]);

    std::vector<double> coef = {4.1, 4.0, 3.9, 4.2, 4.4, 4.3, 4.5, 4.6, 4.7};
    REQUIRE(basis.eval(2000.0, coef) == basis.eval(1650.0, coef));
}

TEST_CASE("negative distances and bad knot vectors are rejected") {
    BSplineBasis basis{SplineSpec{}};
    std::vector<double> coef(9, 1.0);
    REQUIRE_THROWS_AS(basis.eval(-0.5, coef), std::invalid_argument);
    REQUIRE_THROWS_AS(basis.row(-1e-9), std::invalid_argument);
    REQUIRE_THROWS_AS(basis.eval(10.0, std::vector<double>(8, 1.0)), std::invalid_argument);

    SplineSpec dup;
    dup.internal_knots = {90.0, 90.0, 250.0};
    REQUIRE_THROWS_AS(BSplineBasis{dup}, std::invalid_argument);

    SplineSpec unsorted;
    unsorted.internal_knots = {250.0, 90.0};
    REQUIRE_THROWS_AS(BSplineBasis{unsorted}, std::invalid_argument);

    SplineSpec outside;
    outside.internal_knots = {90.0, 1700.0};
    REQUIRE_THROWS_AS(BSplineBasis{outside}, std::invalid_argument);

    SplineSpec flipped;
    flipped.lower = 10.0;
    flipped.upper = 5.0;
    flipped.internal_knots.clear();
    REQUIRE_THROWS_AS(BSplineBasis{flipped}, std::invalid_argument);
}

TEST_CASE("curves stay smooth through interior knots") {
    BSplineBasis basis{SplineSpec{}};
    std::mt19937 gen(74);
    std::normal_distribution<double> normal(4.0, 0.5);
    std::vector<double> coef(9);
    for (auto& c : coef) c = normal(gen);

    const double h = 1e-3;
    for (double k : {90.0, 250.0, 800.0, 1207.0, 1375.0}) {
        auto f = [&](double x) { return basis.eval(x, coef); };
        // value continuity
        REQUIRE(f(k - 1e-9) == Catch::Approx(f(k + 1e-9)).margin(1e-7));
        // one-sided first and second differences agree across the knot for a
        // cubic with simple knots (C2 everywhere)
        double dl = (f(k) - f(k - h)) / h;
        double dr = (f(k + h) - f(k)) / h;
        REQUIRE(dl == Catch::Approx(dr).margin(5e-2 * h + 1e-6));
        double d2l = (f(k) - 2 * f(k - h) + f(k - 2 * h)) / (h * h);
        double d2r = (f(k + 2 * h) - 2 * f(k + h) + f(k)) / (h * h);
        REQUIRE(d2l == Catch::Approx(d2r).margin(5e-1 * h + 1e-4));
    }
}

TEST_CASE("sparse row agrees with the dense row") {
    BSplineBasis basis{SplineSpec{}};
    std::mt19937 gen(75);
    std::uniform_real_distribution<double> unif(0.0, 1649.9);
    for (int rep = 0; rep < 200; ++rep) {
        double x = unif(gen);
        double vals[8];
        int first = basis.row_sparse(x, vals);
        REQUIRE(first >= 0);
        REQUIRE(first + 3 < basis.dimension());
        auto dense = basis.row(x);
        for (int i = 0; i <= 3; ++i)
            REQUIRE(vals[i] == dense[static_cast<size_t>(first + i)]);
    }
}
