#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "coup/bounds.hpp"

using namespace coup;

// Reference values below were computed with 40-digit arithmetic.

TEST(Bounds, KlBernoulli) {
    EXPECT_EQ(kl_bernoulli(0.5, 0.5), 0.0);
    EXPECT_NEAR(kl_bernoulli(0.0, 0.5), std::log(2.0), 1e-15);
    EXPECT_NEAR(kl_bernoulli(0.3, 0.7), 0.33891914415488145, 1e-14);
    EXPECT_GE(kl_bernoulli(0.3, 0.7), 2 * 0.4 * 0.4);
    EXPECT_EQ(kl_bernoulli(0.2, 0.0), std::numeric_limits<double>::infinity());
    EXPECT_EQ(kl_bernoulli(0.2, 1.0), std::numeric_limits<double>::infinity());
    EXPECT_EQ(kl_bernoulli(0.0, 0.0), 0.0);
    EXPECT_EQ(kl_bernoulli(1.0, 1.0), 0.0);
    EXPECT_THROW(kl_bernoulli(-0.1, 0.5), std::invalid_argument);
    EXPECT_THROW(kl_bernoulli(0.5, 1.1), std::invalid_argument);
}

TEST(Bounds, KlUcbExamples) {
    EXPECT_EQ(kl_ucb(0.37, 0.0), 0.37);
    EXPECT_EQ(kl_ucb(1.0, 3.0), 1.0);
    for (double a : {0.01, 0.5, 2.0}) EXPECT_NEAR(kl_ucb(0.0, a), 1.0 - std::exp(-a), 1e-9);
    EXPECT_NEAR(kl_ucb(0.3, 0.1), 0.52102761206824748, 1e-9);
    EXPECT_NEAR(kl_ucb(0.9, 0.05), 0.96872160372772063, 1e-9);
    EXPECT_NEAR(kl_ucb(0.01, 2.0), 0.87449561746202426, 1e-9);
    EXPECT_NEAR(kl_ucb(0.5, 0.001), 0.52234950409218812, 1e-9);
    EXPECT_THROW(kl_ucb(0.5, -1.0), std::invalid_argument);
}

TEST(Bounds, KlLcbExamples) {
    EXPECT_EQ(kl_lcb(0.37, 0.0), 0.37);
    EXPECT_EQ(kl_lcb(0.0, 3.0), 0.0);
    for (double a : {0.01, 0.5, 2.0}) EXPECT_NEAR(kl_lcb(1.0, a), std::exp(-a), 1e-9);
    EXPECT_NEAR(kl_lcb(0.3, 0.1), 0.12913012101949403, 1e-9);
    EXPECT_NEAR(kl_lcb(0.9, 0.05), 0.77992139889307538, 1e-9);
    EXPECT_EQ(kl_lcb(0.01, 2.0), 0.0);
    EXPECT_NEAR(kl_lcb(0.5, 0.001), 0.47765049590781188, 1e-9);
}

TEST(Bounds, PinskerAndResidualProperty) {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double p = unit(rng);
        const double a = std::exp(std::uniform_real_distribution<double>(-12.0, 2.0)(rng));
        const double u = kl_ucb(p, a);
        const double l = kl_lcb(p, a);
        const double h = std::sqrt(a / 2);
        ASSERT_LE(u, std::min(1.0, p + h));
        ASSERT_GE(l, std::max(0.0, p - h));
        ASSERT_LE(l, p);
        ASSERT_GE(u, p);
        if (u > 0.0 && u < 1.0) ASSERT_LE(std::abs(kl_bernoulli(p, u) - a), 1e-6) << p << ' ' << a;
        if (l > 0.0 && l < 1.0) ASSERT_LE(std::abs(kl_bernoulli(p, l) - a), 1e-6) << p << ' ' << a;
    }
}

TEST(Bounds, MonotoneInRadius) {
    for (double p : {0.0, 0.2, 0.5, 0.93, 1.0}) {
        double pu = p, pl = p;
        for (double a = 1e-6; a < 10; a *= 1.7) {
            const double u = kl_ucb(p, a);
            const double l = kl_lcb(p, a);
            EXPECT_GE(u, pu - 1e-12);
            EXPECT_LE(l, pl + 1e-12);
            pu = u;
            pl = l;
        }
        EXPECT_NEAR(kl_ucb(p, 1e-14), p, 1e-6);
        EXPECT_NEAR(kl_lcb(p, 1e-14), p, 1e-6);
    }
}

TEST(Bounds, Radius) {
    EXPECT_NEAR(radius(1, 1, 1.0, 36 * std::log(2.0) * std::log(2.0)), 0.0, 1e-14);
    EXPECT_NEAR(radius(10, 10, 1.0, 0.01), 1.6666003655257055, 1e-13);
    EXPECT_NEAR(radius(10, 10, 1.0, 0.01), 0.1 * std::log(36.0 * 100 * 100 * std::log(2.0) * std::log(2.0) / 0.01), 1e-13);
    EXPECT_NEAR(radius(10, 100, 1.0, 0.01), 0.21271173841245147, 1e-13);
    EXPECT_NEAR(radius(10, 200, 1.0, 0.01), 0.11328734101182519, 1e-13);
    EXPECT_LT(radius(10, 200, 1.0, 0.01), radius(10, 100, 1.0, 0.01));
    EXPECT_GT(radius(20, 100, 1.0, 0.01), radius(10, 100, 1.0, 0.01));
    EXPECT_GT(radius(10, 100, 8.0, 0.01), radius(10, 100, 1.0, 0.01));
    EXPECT_TRUE(std::isfinite(radius(1000000, 1000000000, 1e6, 1e-10)));
    EXPECT_THROW(radius(0, 1, 1.0, 0.1), std::invalid_argument);
    EXPECT_THROW(radius(1, 0, 1.0, 0.1), std::invalid_argument);
    EXPECT_THROW(radius(1, 1, 0.0, 0.1), std::invalid_argument);
    EXPECT_THROW(radius(1, 1, 1.0, 0.0), std::invalid_argument);
}

TEST(Bounds, HoeffdingAndComposite) {
    EXPECT_EQ(hoeffding_radius(0.0), 0.0);
    EXPECT_DOUBLE_EQ(hoeffding_radius(2.0), 1.0);
    EXPECT_DOUBLE_EQ(hoeffding_radius(0.5), 0.5);
    EXPECT_DOUBLE_EQ(composite_lcb(0.6, 1.0, 0.7), 0.6);
    EXPECT_DOUBLE_EQ(composite_lcb(0.6, 0.3, 0.0), 0.6);
    EXPECT_DOUBLE_EQ(composite_lcb(0.5, 0.8, 0.5), 0.4);
    EXPECT_EQ(composite_lcb(0.1, 0.0, 0.9), 0.0);
    EXPECT_THROW(composite_lcb(1.5, 0.0, 0.0), std::invalid_argument);
}
