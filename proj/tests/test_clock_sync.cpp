#include <gtest/gtest.h>

#include <cmath>

#include "rfsync/clock_sync.hpp"

using namespace rfsync;

TEST(HardwareClock, TickConversionsAreConsistent) {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const HardwareClock c(rng.uniform(-40, 40), 42'000, static_cast<SimTime>(rng.below(1'000'000'000)));
        for (int k = 0; k < 20; ++k) {
            const SimTime t = static_cast<SimTime>(rng.below(120'000'000'000'000ULL));
            const SimTime e = c.next_edge(t);
            ASSERT_GE(e, t);
            ASSERT_LT(e - t, 43'000);
            ASSERT_GT(c.ticks_at(e), c.ticks_at(e - 1));
            const auto k0 = c.ticks_at(t);
            ASSERT_LE(c.time_of_tick(k0), t);
            ASSERT_GT(c.time_of_tick(k0 + 1), t);
        }
    }
}

TEST(HardwareClock, RateAndElapsed) {
    const HardwareClock c(20.0, 42'000);
    EXPECT_DOUBLE_EQ(c.rate(), 1.00002);
    EXPECT_EQ(c.ticks_at(0), 0);
    EXPECT_NEAR(c.elapsed_seconds(c.ticks_at(ps_from_seconds(1.0))), 1.0, 42e-9);
    EXPECT_THROW(HardwareClock(0, 0), std::invalid_argument);
}

TEST(CompensationFilter, FirstSamplePassesThrough) {
    CompensationFilter f(0.75);
    EXPECT_FALSE(f.initialized());
    EXPECT_DOUBLE_EQ(f.update(400e-9), 400e-9);
    EXPECT_DOUBLE_EQ(f.update(800e-9), 0.75 * 400e-9 + 0.25 * 800e-9);
    EXPECT_EQ(f.samples(), 2u);
    EXPECT_THROW(CompensationFilter(1.0), std::invalid_argument);
    EXPECT_THROW(CompensationFilter(-0.1), std::invalid_argument);
}

TEST(CompensationFilter, MatchesClosedFormSum) {
    Rng rng(6);
    for (double a : {0.0, 0.5, 0.75, 0.9}) {
        CompensationFilter f(a);
        std::vector<double> c;
        for (int k = 0; k < 40; ++k) {
            c.push_back(rng.uniform(0, 1e-6));
            const double got = f.update(c.back());
            double want = std::pow(a, k) * c[0];
            for (int j = 1; j <= k; ++j) want += (1 - a) * std::pow(a, k - j) * c[j];
            ASSERT_NEAR(got, want, 1e-18) << a << " " << k;
        }
    }
}

TEST(CompensationFilter, ConstantInputIsFixedPoint) {
    CompensationFilter f(0.75);
    for (int k = 0; k < 100; ++k) EXPECT_DOUBLE_EQ(f.update(226.8e-9), 226.8e-9);
}

TEST(VirtualClock, LatenessMovesLinearlyOverOnePeriod) {
    VirtualClock v;
    EXPECT_EQ(v.lateness(5), 0.0);
    const SimTime T = ps_from_seconds(60.0);
    v.sync(0, 900e-9, T);
    EXPECT_NEAR(v.lateness(T / 2), 450e-9, 1e-15);
    EXPECT_DOUBLE_EQ(v.lateness(T), 900e-9);
    EXPECT_DOUBLE_EQ(v.lateness(2 * T), 900e-9);
    EXPECT_NEAR(v.predicted_slope(T / 3), 1.0 - 900e-9 / 60.0, 1e-15);
    EXPECT_DOUBLE_EQ(v.sync_error(T), 900e-9);
}

TEST(VirtualClock, RampReachesNinetyNinePercentInOnePeriod) {
    VirtualClock v;
    const SimTime T = ps_from_seconds(60.0);
    EXPECT_FALSE(v.apply_correction(0, 906e-9, 60.0));
    // 896.94 ns: 897 at nanosecond resolution
    EXPECT_NEAR(v.correction(T) * 1e9, 906.0 * 0.99, 1e-6);
    EXPECT_GE(std::round(v.correction(T) * 1e9), 897.0);
    EXPECT_NEAR(v.ramp_pole(T), 0.01, 1e-12);
    for (SimTime t = 0; t < T; t += T / 97) EXPECT_LE(v.correction(t), v.correction(t + T / 97));
}

TEST(VirtualClock, NegativeStepIsClampedBySlopeFloor) {
    VirtualClock v(0.5);
    const SimTime tick = 42'000;
    v.apply_correction(0, 906e-9, 1e-6);
    const SimTime t1 = ps_from_seconds(1e-3);
    ASSERT_NEAR(v.correction(t1), 906e-9, 1e-15);
    EXPECT_TRUE(v.apply_correction(t1, 0.0, 1e-6));
    EXPECT_EQ(v.clamp_count(), 1u);
    const auto r = sample_monotonicity(v, t1, t1 + ps_from_seconds(20e-6), tick, 400);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_GE(r.min_slope_ratio, 0.5);
    EXPECT_LT(r.min_slope_ratio, 0.6);
}

TEST(VirtualClock, SyncErrorIsLatenessMinusCorrection) {
    VirtualClock v;
    const SimTime T = ps_from_seconds(60.0);
    v.sync(0, 900e-9, T);
    v.apply_correction(0, 900e-9, 60.0);
    for (SimTime t : {SimTime{0}, T / 4, T / 2, T}) EXPECT_NEAR(v.sync_error(t), v.lateness(t) - v.correction(t), 1e-18);
    EXPECT_LT(std::abs(v.sync_error(T)), 10e-9);
}

TEST(VirtualClock, RandomUpdatesStayMonotonic) {
    Rng rng(9);
    const SimTime T = ps_from_seconds(60.0);
    VirtualClock v;
    MonotonicityReport total;
    for (int k = 0; k < 200; ++k) {
        const SimTime t = k * T;
        v.sync(t, rng.uniform(0, 2e-6), T);
        total.merge(sample_monotonicity(v, t, t + T, 42'000, 64));
        v.apply_correction(t + ps_from_seconds(0.02), rng.uniform(0, 2e-6), 60.0);
        total.merge(sample_monotonicity(v, t + ps_from_seconds(0.02), t + T, 42'000, 64));
    }
    EXPECT_EQ(total.violations, 0u);
    EXPECT_GE(total.min_slope_ratio, 0.5);
}
