#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mevlab/numerics.hpp"
#include "mevlab/ode.hpp"
#include "mevlab/parallel.hpp"

TEST(GaussLegendre, ExactForDegree15) {
    auto p = [](double x) { return std::pow(x, 15) - 3 * std::pow(x, 8) + x; };
    const double exact = (1.0 / 16) * (std::pow(2.0, 16) - 1.0) - 3.0 / 9 * (std::pow(2.0, 9) - 1.0) + 0.5 * (4.0 - 1.0);
    EXPECT_NEAR(mevlab::GaussLegendre8::integrate(p, 1.0, 2.0), exact, 1e-10);
}

TEST(GaussLegendre, WeightsSumToTwo) {
    double s = 0.0;
    for (double w : mevlab::GaussLegendre8::weights) s += w;
    EXPECT_NEAR(s, 2.0, 1e-15);
}

TEST(Isotonic, PoolsViolators) {
    std::vector<double> y{1.0, 3.0, 2.0, 4.0, 0.0};
    mevlab::isotonic_project(y);
    EXPECT_DOUBLE_EQ(y[0], 1.0);
    for (std::size_t i = 1; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], 2.25);
}

TEST(Isotonic, LeavesMonotoneInputUntouched) {
    std::vector<double> y{0.0, 0.1, 0.1, 0.5, 2.0};
    const auto copy = y;
    mevlab::isotonic_project(y);
    EXPECT_EQ(y, copy);
}

TEST(Isotonic, PreservesSumAndIsNondecreasing) {
    std::vector<double> y;
    for (int i = 0; i < 200; ++i) y.push_back(std::sin(0.37 * i) + 0.01 * i);
    double before = 0.0;
    for (double v : y) before += v;
    mevlab::isotonic_project(y);
    double after = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        after += y[i];
        if (i) {
            EXPECT_GE(y[i], y[i - 1]);
        }
    }
    EXPECT_NEAR(before, after, 1e-10);
}

TEST(Interpolate, LinearAndClamped) {
    const std::vector<double> xs{0.0, 1.0, 3.0};
    const std::vector<double> ys{0.0, 2.0, 3.0};
    EXPECT_DOUBLE_EQ(mevlab::interpolate_linear(xs, ys, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(mevlab::interpolate_linear(xs, ys, 2.0), 2.5);
    EXPECT_DOUBLE_EQ(mevlab::interpolate_linear(xs, ys, -1.0), 0.0);
    EXPECT_DOUBLE_EQ(mevlab::interpolate_linear(xs, ys, 9.0), 3.0);
}

TEST(Trapezoid, ExactForLinear) {
    const std::vector<double> xs{0.0, 0.3, 1.0};
    const std::vector<double> ys{1.0, 1.6, 3.0};
    EXPECT_NEAR(mevlab::trapezoid(xs, ys), 2.0, 1e-15);
}

TEST(Bracket, FindsRootToTolerance) {
    const auto r = mevlab::bisect_then_secant([](double x) { return std::cos(x) - x; }, 0.0, 1.0, 1e-14);
    EXPECT_NEAR(r.root, 0.7390851332151607, 1e-14);
    EXPECT_LE(r.hi - r.lo, 1e-14);
    EXPECT_TRUE(r.root >= r.lo && r.root <= r.hi);
}

TEST(Bracket, RejectsBracketWithoutSignChange) {
    EXPECT_THROW(mevlab::bisect_then_secant([](double x) { return x * x + 1; }, -1.0, 1.0, 1e-12), std::invalid_argument);
}

TEST(Bracket, EndpointRoot) {
    const auto r = mevlab::bisect_then_secant([](double x) { return x - 1.0; }, 0.0, 1.0, 1e-12);
    EXPECT_EQ(r.root, 1.0);
}

TEST(Dopri5, ExponentialGrowth) {
    mevlab::OdeStats stats;
    double h = 0.0;
    const double y = mevlab::integrate_dopri5([](double, double y) { return y; }, 0.0, 1.0, 2.0, h, {1e-12, 1e-12}, stats);
    EXPECT_NEAR(y, std::exp(2.0), 1e-9);
    EXPECT_GT(stats.accepted, 0);
}

TEST(Dopri5, NonautonomousAndChained) {
    mevlab::OdeStats stats;
    double h = 0.0;
    double y = 0.0;
    // y' = cos t, y(0) = 0 integrated over ten adjacent pieces
    for (int i = 0; i < 10; ++i) {
        y = mevlab::integrate_dopri5([](double t, double) { return std::cos(t); }, i * 0.3, y, (i + 1) * 0.3, h, {1e-12, 1e-12},
                                     stats);
    }
    EXPECT_NEAR(y, std::sin(3.0), 1e-10);
}

TEST(Dopri5, ZeroLengthIntervalReturnsInitialValue) {
    mevlab::OdeStats stats;
    double h = 0.1;
    EXPECT_EQ(mevlab::integrate_dopri5([](double, double) { return 1.0; }, 1.0, 5.0, 1.0, h, {}, stats), 5.0);
}

TEST(Parallel, EveryIndexOnceForAnyWorkerCount) {
    for (unsigned w : {1u, 2u, 3u, 8u}) {
        std::vector<std::atomic<int>> hits(1000);
        mevlab::parallel_for(hits.size(), w, [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    }
}

TEST(Parallel, RethrowsWorkerException) {
    EXPECT_THROW(mevlab::parallel_for(100, 4,
                                      [](std::size_t i) {
                                          if (i == 37) throw std::runtime_error("boom");
                                      }),
                 std::runtime_error);
}
