#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "metree/discrete.hpp"
#include "metree/scaling.hpp"

using namespace metree;

namespace {

Expression ex(const char* t) { return Expression::parse(t); }

FiniteChain random_chain(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> rate(0.05, 5.0), coin(0.0, 1.0);
    FiniteChain c(n);
    for (int i = 0; i < n; ++i) c.add_rate(i, (i + 1) % n, rate(rng));
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            if (x != y && coin(rng) < 0.35) c.add_rate(x, y, rate(rng));
    return c;
}

std::size_t count_arborescences(const FiniteChain& c, std::size_t root) {
    std::size_t k = 0;
    for_each_arborescence(c, root, [&](const std::vector<std::size_t>&) { ++k; });
    return k;
}

// Directed matrix-tree theorem: in-arborescences toward r are counted by the
// minor of the out-degree Laplacian with row and column r removed.
double kirchhoff_in_count(const FiniteChain& c, std::size_t r) {
    const auto n = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y)
            if (x != y && c.rate(x, y) > 0.0) {
                lap(x, x) += 1;
                lap(x, y) -= 1;
            }
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (Eigen::Index i = 0, a = 0; i < n; ++i) {
        if (i == static_cast<Eigen::Index>(r)) continue;
        for (Eigen::Index j = 0, b = 0; j < n; ++j) {
            if (j == static_cast<Eigen::Index>(r)) continue;
            minor(a, b++) = lap(i, j);
        }
        ++a;
    }
    return minor.determinant();
}

}  // namespace

TEST(FiniteChain, TwoStates) {
    FiniteChain c(2);
    c.add_rate(0, 1, 3.0);
    c.add_rate(1, 0, 1.0);
    const auto mu = mctt_stationary(c);
    EXPECT_NEAR(mu[0], 0.25, 1e-15);
    EXPECT_NEAR(mu[1], 0.75, 1e-15);
}

TEST(FiniteChain, DirectedThreeRing) {
    FiniteChain c(3);
    const double r01 = 1.0, r12 = 2.0, r20 = 3.0;
    c.add_rate(0, 1, r01);
    c.add_rate(1, 2, r12);
    c.add_rate(2, 0, r20);
    // mu(x) is proportional to the product of the two rates not leaving x.
    const double w0 = r12 * r20, w1 = r20 * r01, w2 = r01 * r12, z = w0 + w1 + w2;
    const auto a = mctt_stationary(c), b = stationary_linear(c);
    EXPECT_NEAR(a[0], w0 / z, 1e-15);
    EXPECT_NEAR(a[1], w1 / z, 1e-15);
    EXPECT_NEAR(a[2], w2 / z, 1e-15);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(FiniteChain, MatrixTreeMatchesBalanceEquations) {
    std::mt19937_64 rng(99);
    for (int n = 2; n <= 8; ++n)
        for (int rep = 0; rep < 3; ++rep) {
            const auto c = random_chain(rng, n);
            const auto a = mctt_stationary(c), b = stationary_linear(c);
            for (int i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
            EXPECT_NEAR(static_cast<double>(count_arborescences(c, 0)), kirchhoff_in_count(c, 0), 1e-6);
        }
}

TEST(FiniteChain, RejectsInvalidInput) {
    FiniteChain c(3);
    c.add_rate(0, 1, 1.0);
    c.add_rate(1, 0, 1.0);
    c.add_rate(2, 0, 1.0);
    EXPECT_FALSE(c.strongly_connected());
    EXPECT_THROW(mctt_stationary(c), ConfigError);
    EXPECT_THROW(stationary_linear(c), ConfigError);
    EXPECT_THROW(c.add_rate(0, 1, 0.0), ConfigError);
    EXPECT_THROW(c.add_rate(0, 1, -1.0), ConfigError);
    EXPECT_THROW(c.add_rate(0, 5, 1.0), ConfigError);
}

TEST(RingWalk, ArborescenceCountEqualsN) {
    const auto mt = micro_from_macro(ex("0.5"), ex("1"), ex("0.5"));
    for (int n : {3, 5, 8}) {
        const auto c = ring_walk(mt, n);
        for (int r = 0; r < n; ++r) EXPECT_EQ(count_arborescences(c, r), static_cast<std::size_t>(n));
    }
}

TEST(RingWalk, RatesAndAntisymmetry) {
    const auto mt = micro_from_macro(ex("0"), ex("1"), ex("0"), 2.0);
    const auto c = ring_walk(mt, 3);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(c.rate(i, (i + 1) % 3), 9.0 * 0.25 * 2.0, 1e-12);
        EXPECT_NEAR(c.rate((i + 1) % 3, i), 9.0 * 0.25 * 2.0, 1e-12);
    }
    const auto b = ex("1 + 0.3*sin(2*pi*x)");
    const auto m2 = micro_from_macro(b, ex("1"), b);
    const int n = 40;
    const auto w = ring_walk(m2, n);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        // r(i,j) / r(j,i) = alpha(i) / alpha(j) * exp(2 F_N(i,j)).
        const double fn = integrate([&](double z) { return b(z); }, static_cast<double>(i) / n, (i + 1.0) / n);
        EXPECT_NEAR(std::log(w.rate(i, j) / w.rate(j, i)), std::log(m2.alpha(i / 40.0) / m2.alpha(j / 40.0)) + 2 * fn, 1e-12);
    }
    EXPECT_THROW(ring_walk(mt, 2), ConfigError);
}

TEST(MicroFromMacro, ReproducesDiffusionCoefficient) {
    const auto b = ex("1 + 0.3*sin(2*pi*x)"), sigma = ex("1 + 0.2*cos(2*pi*x)");
    // F = mean of s over the ring, computed independently by quadrature.
    const double mean = integrate([&](double x) { return b(x) / (sigma(x) * sigma(x)); }, 0.0, 1.0, 1e-14);
    const auto mt = micro_from_macro(b, sigma, Expression::constant(mean), 1.5);
    for (int i = 0; i <= 50; ++i) {
        const double x = i / 50.0;
        EXPECT_NEAR(2.0 * mt.Q(x) * mt.alpha(x) / (sigma(x) * sigma(x)), 1.0, 1e-13);
    }
    EXPECT_NEAR(mt.Q(0.0), mt.Q(1.0), 1e-9);  // periodic
    const auto trivial = micro_from_macro(b, ex("1"), b, 2.0);
    for (double x : {0.0, 0.4, 0.9}) {
        EXPECT_NEAR(trivial.Q(x), 2.0, 1e-13);
        EXPECT_NEAR(trivial.alpha(x), 0.25, 1e-13);
    }
}

TEST(MicroFromMacro, RejectsFieldWithWrongTotal) {
    EXPECT_THROW(micro_from_macro(ex("1"), ex("1"), ex("0")), DomainError);
    EXPECT_NO_THROW(micro_from_macro(ex("1"), ex("1"), ex("0"), 1.0, {}, false));
    EXPECT_THROW(micro_from_macro(ex("1"), ex("1"), ex("1"), 0.0), ConfigError);
}

TEST(Scaling, UniformCaseIsExact) {
    EXPECT_LT(scaling_error(ex("0"), ex("1"), ex("0"), 50), 1e-12);
    EXPECT_LT(scaling_error(ex("0.7"), ex("1"), ex("0.7"), 50), 1e-12);
}

TEST(Scaling, ErrorDecreasesWithRefinement) {
    const auto b = ex("1 + 0.3*sin(2*pi*x)");
    const double e200 = scaling_error(b, ex("1"), b, 200);
    const double e800 = scaling_error(b, ex("1"), b, 800);
    EXPECT_LT(e800, e200);
    const auto rows = scaling_study(b, ex("1"), {b, ex("1")}, {100, 200});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_FALSE(rows[0].ratio[0].has_value());
    EXPECT_GT(*rows[1].ratio[0], 1.0);
    EXPECT_GT(rows[1].gauge_difference, 0.0);
}
