#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "rfsync/flooding.hpp"

using namespace rfsync;

namespace {

std::vector<NodePosition> line(std::size_t n, double spacing) {
    std::vector<NodePosition> p;
    for (std::size_t i = 0; i < n; ++i) p.push_back({spacing * static_cast<double>(i), 0.0});
    return p;
}

RadioParams noiseless() {
    RadioParams p;
    p.sfd_jitter_std_s = 0.0;
    return p;
}

// Hop counts by repeated relaxation over the full distance matrix.
std::vector<int> oracle_hops(const std::vector<NodePosition>& pos, std::size_t master, double range) {
    const int inf = std::numeric_limits<int>::max() / 2;
    const std::size_t n = pos.size();
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i == j) d[i][j] = 0;
            else if (std::hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y) <= range) d[i][j] = 1;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = d[master][i] >= inf ? -1 : d[master][i];
    return out;
}

} // namespace

TEST(AssignHops, LineTopology) {
    const auto pos = line(7, 68.0);
    const auto g = assign_hops(pos, 0, RadioParams{});
    for (NodeId i = 0; i < 7; ++i) EXPECT_EQ(g.hop[i], static_cast<int>(i));
    EXPECT_EQ(g.max_hop(), 6);
    for (NodeId i = 1; i < 7; ++i) {
        EXPECT_EQ(predecessor_set(i, g, RadioParams{}).members, std::vector<NodeId>{i - 1});
    }
    EXPECT_THROW(predecessor_set(0, g, RadioParams{}), std::invalid_argument);
}

TEST(AssignHops, MasterInTheMiddle) {
    const auto g = assign_hops(line(5, 68.0), 2, RadioParams{});
    EXPECT_EQ(g.hop, (std::vector<int>{2, 1, 0, 1, 2}));
}

TEST(AssignHops, MatchesShortestPathOracle) {
    Rng rng(11, 0, Stream::Topology);
    int connected = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.below(25);
        std::vector<NodePosition> pos;
        for (std::size_t i = 0; i < n; ++i) pos.push_back({rng.uniform(0, 300), rng.uniform(0, 300)});
        const auto want = oracle_hops(pos, 0, 100.0);
        const bool reachable = std::find(want.begin(), want.end(), -1) == want.end();
        if (!reachable) {
            EXPECT_THROW(assign_hops(pos, 0, RadioParams{}), TopologyError);
            continue;
        }
        ++connected;
        const auto g = assign_hops(pos, 0, RadioParams{});
        ASSERT_EQ(g.hop, want);
        for (NodeId v = 0; v < n; ++v) {
            for (NodeId u : g.in_edges[v]) {
                EXPECT_EQ(g.hop[u] + 1, g.hop[v]);
                EXPECT_NE(std::find(g.out_edges[u].begin(), g.out_edges[u].end(), v), g.out_edges[u].end());
            }
            if (v != 0) { EXPECT_FALSE(g.in_edges[v].empty()); }
        }
    }
    EXPECT_GT(connected, 30);
}

TEST(AssignHops, RejectsBadInput) {
    EXPECT_THROW(assign_hops(std::vector<NodePosition>{}, 0, RadioParams{}), std::invalid_argument);
    EXPECT_THROW(assign_hops(line(3, 10), 3, RadioParams{}), std::invalid_argument);
    try {
        assign_hops(line(3, 150.0), 0, RadioParams{});
        FAIL();
    } catch (const TopologyError& e) {
        EXPECT_EQ(e.node(), 1u);
    }
    std::vector<NodePosition> nan{{0, 0}, {std::nan(""), 0}};
    EXPECT_THROW(assign_hops(nan, 0, RadioParams{}), TopologyError);
}

TEST(PredecessorSet, DiamondAndCaptureBoundary) {
    const std::vector<NodePosition> diamond{{0, 0}, {60, 20}, {60, -20}, {120, 0}};
    const auto g = assign_hops(diamond, 0, RadioParams{});
    EXPECT_EQ(g.hop, (std::vector<int>{0, 1, 1, 2}));
    EXPECT_EQ(predecessor_set(3, g, RadioParams{}).members, (std::vector<NodeId>{1, 2}));

    // second predecessor exactly capture_window weaker is still a member
    const std::vector<NodePosition> skewed{{0, 0}, {50, 30}, {50, -30}, {80, 0}};
    const auto g2 = assign_hops(skewed, 0, RadioParams{});
    RadioParams p;
    p.capture_window_db = received_power(0, g2.link_distance(1, 3), 2.0) - received_power(0, g2.link_distance(2, 3), 2.0);
    p.capture_window_db = std::abs(p.capture_window_db);
    if (p.capture_window_db > 0) {
        EXPECT_EQ(predecessor_set(3, g2, p).members.size(), 2u);
        p.capture_window_db = std::nextafter(p.capture_window_db, 0.0);
        EXPECT_EQ(predecessor_set(3, g2, p).members.size(), 1u);
    }
}

TEST(SimulateFlood, NoiselessLineDelays) {
    const auto p = noiseless();
    const auto g = assign_hops(line(7, 68.0), 0, p);
    Rng rng(1);
    const SimTime relay = 512'000'000;
    const auto rx = simulate_flood(g, 1'000'000, p, relay, rng);
    EXPECT_NEAR(seconds_from_ps(rx[6].true_delay) * 1e6, 1.361, 0.001);
    const SimTime lag = ps_from_seconds(p.sfd_detection_lag_s);
    for (NodeId v = 1; v < 7; ++v) {
        ASSERT_TRUE(rx[v].received);
        EXPECT_EQ(rx[v].kind, ReceptionKind::Clean);
        EXPECT_EQ(rx[v].true_delay, static_cast<SimTime>(v) * propagation_delay_ps(68.0));
        EXPECT_EQ(rx[v].timing_offset, rx[v].true_delay);
        EXPECT_EQ(rx[v].arrival, 1'000'000 + v * (propagation_delay_ps(68.0) + lag) + (v - 1) * relay);
    }
    EXPECT_NEAR(oracle::c * seconds_from_ps(rx[3].true_delay), 3 * 68.0, 1e-3);
}

TEST(SimulateFlood, DiamondMergesConcurrentRelays) {
    const auto p = noiseless();
    const std::vector<NodePosition> diamond{{0, 0}, {60, 20}, {60, -20}, {120, 0}};
    const auto g = assign_hops(diamond, 0, p);
    Rng rng(1);
    const auto rx = simulate_flood(g, 0, p, 512'000'000, rng);
    EXPECT_EQ(rx[3].kind, ReceptionKind::Constructive);
    EXPECT_EQ(rx[3].contributors, (std::vector<NodeId>{1, 2}));
    EXPECT_EQ(rx[3].true_delay, 2 * propagation_delay_ps(std::hypot(60.0, 20.0)));
}

TEST(SimulateFlood, ExcessPathDelayAddsPerHop) {
    auto p = noiseless();
    p.excess_path_delay_s = 10e-9;
    const auto g = assign_hops(line(4, 60.0), 0, p);
    Rng rng(1);
    const auto rx = simulate_flood(g, 0, p, 512'000'000, rng);
    EXPECT_EQ(rx[3].true_delay, 3 * (propagation_delay_ps(60.0) + 10'000));
}

TEST(WriteTopology, OneLinePerNode) {
    const auto g = assign_hops(line(3, 60.0), 0, RadioParams{});
    std::ostringstream os;
    write_topology(os, g, RadioParams{});
    EXPECT_EQ(os.str(), "# node hop x_m y_m predecessors\n0 0 0 0 preds=-\n1 1 60 0 preds=0\n2 2 120 0 preds=1\n");
}
