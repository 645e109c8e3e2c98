#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rfsync/rng.hpp"

using namespace rfsync;

TEST(Rng, SameSeedSameSequence) {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, DerivedStreamsAreDistinct) {
    std::set<std::uint64_t> seeds;
    for (std::uint64_t node = 0; node < 50; ++node)
        for (auto s : {Stream::FloodJitter, Stream::MeasurementJitter, Stream::ChannelMerge, Stream::SyncResidual,
                       Stream::Topology, Stream::Bargraph, Stream::ClockSkew})
            seeds.insert(derive_seed(7, node, s));
    EXPECT_EQ(seeds.size(), 50u * 7u);
    EXPECT_NE(derive_seed(7, 0, Stream::FloodJitter), derive_seed(8, 0, Stream::FloodJitter));
}

TEST(Rng, DerivedStreamIsPureFunctionOfItsKey) {
    Rng a(5, 3, Stream::SyncResidual);
    Rng noise(5, 3, Stream::FloodJitter);
    for (int i = 0; i < 100; ++i) noise.next();
    Rng b(5, 3, Stream::SyncResidual);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, UniformAndBelowRanges) {
    Rng r(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(r.below(7), 7u);
    }
    EXPECT_EQ(r.below(0), 0u);
    EXPECT_EQ(r.below(1), 0u);
}

TEST(Rng, NormalMoments) {
    Rng r(2);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal(3.0, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 3.0, 0.02);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 2.0, 0.02);
}

TEST(Rng, BernoulliFrequency) {
    Rng r(3);
    int hits = 0;
    for (int i = 0; i < 100000; ++i) hits += r.bernoulli(0.25);
    EXPECT_NEAR(hits / 100000.0, 0.25, 0.005);
}
