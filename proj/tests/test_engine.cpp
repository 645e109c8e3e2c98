#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "rfsync/engine.hpp"
#include "rfsync/report.hpp"

using namespace rfsync;

namespace {

Scenario pair_at(double d) {
    Scenario s;
    s.name = "pair";
    s.positions = {{0, 0}, {d, 0}};
    s.period_s = 1.0;
    s.periods = 30;
    s.radio.sfd_jitter_std_s = 0.0;
    s.residual_std_s = 0.0;
    return s;
}

std::vector<MetricsRecord> rows_of(const Scenario& s, RunResult* out = nullptr) {
    MemorySink mem;
    auto r = run_scenario(s, mem);
    if (out) *out = std::move(r);
    return mem.rows;
}

} // namespace

TEST(Engine, NoiselessSingleHopWithinOneTick) {
    for (double d : {0.5, 10.0, 68.0, 99.0}) {
        RunResult res;
        const auto rows = rows_of(pair_at(d), &res);
        ASSERT_EQ(rows.size(), 30u);
        for (const auto& r : rows) {
            ASSERT_FALSE(std::isnan(r.estimation_error_ns)) << d;
            EXPECT_LE(std::abs(r.estimation_error_ns), 42.0) << d;
            EXPECT_NEAR(r.true_delay_ns, d / oracle::c * 1e9, 1e-3);
        }
        EXPECT_EQ(res.stats.accepted, 30u);
        EXPECT_EQ(res.formation_periods(), 1u);
    }
}

TEST(Engine, UncompensatedSyncErrorEqualsFloodDelay) {
    auto s = experiment_preset("multi_hop_line");
    s.radio.sfd_jitter_std_s = 0.0;
    s.residual_std_s = 0.0;
    s.compensation = false;
    s.periods = 5;
    s.warmup_periods = 0;
    for (const auto& r : rows_of(s)) {
        if (r.period == 0) continue;
        EXPECT_NEAR(r.sync_error_ns, r.true_delay_ns, 1e-3);
        EXPECT_NEAR(r.true_delay_ns, r.hop * 68.0 / oracle::c * 1e9, 1e-3 * r.hop);
    }
}

TEST(Engine, CompensationCancelsDelayWhenNoiseless) {
    auto s = experiment_preset("multi_hop_line");
    s.radio.sfd_jitter_std_s = 0.0;
    s.residual_std_s = 0.0;
    s.periods = 30;
    for (const auto& r : rows_of(s))
        if (r.period >= 15) { EXPECT_LE(std::abs(r.sync_error_ns), 42.0 * r.hop) << r.node; }
}

TEST(Engine, CompensationDoesNotAlterEstimates) {
    auto on = experiment_preset("full_scheme");
    on.periods = 40;
    on.warmup_periods = 5;
    on.compare_compensation = false;
    auto off = on;
    off.compensation = false;
    const auto a = rows_of(on), b = rows_of(off);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool both_nan = std::isnan(a[i].c_applied_ns) && std::isnan(b[i].c_applied_ns);
        if (!both_nan) { EXPECT_DOUBLE_EQ(a[i].c_applied_ns, b[i].c_applied_ns); }
        EXPECT_DOUBLE_EQ(a[i].true_delay_ns, b[i].true_delay_ns);
    }
}

TEST(Engine, SameSeedSameRowsOtherSeedDiffers) {
    auto s = experiment_preset("multi_hop_line");
    s.periods = 20;
    s.warmup_periods = 0;
    const auto a = render_run(s, OutputFormat::Csv).text;
    EXPECT_EQ(a, render_run(s, OutputFormat::Csv).text);
    s.seed = 2;
    EXPECT_NE(a, render_run(s, OutputFormat::Csv).text);
}

TEST(Engine, Conservation) {
    auto s = experiment_preset("full_scheme");
    s.periods = 30;
    s.warmup_periods = 0;
    s.compare_compensation = false;
    RunResult res;
    const auto rows = rows_of(s, &res);
    const auto& st = res.stats;
    EXPECT_EQ(rows.size(), 30u * 6u);
    EXPECT_EQ(res.rows, rows.size());
    EXPECT_EQ(st.floods, 30u);
    EXPECT_EQ(st.measurements, 30u * 2u);
    EXPECT_EQ(st.measurements, st.accepted + st.rejected_sanity + st.no_response + st.lost + st.invalid);
    EXPECT_EQ(st.hop_address_violations, 0u);
    EXPECT_EQ(st.response_timing_violations, 0u);
    EXPECT_EQ(st.monotonicity.violations, 0u);
    std::uint64_t counted = 0;
    for (const auto& r : rows) counted += r.counts.total();
    EXPECT_EQ(counted, st.accepted + st.rejected_sanity + st.lost + st.invalid);
}

TEST(Engine, FormationFollowsHopOrder) {
    auto s = experiment_preset("multi_hop_line");
    s.tdma_slots = 1;
    s.periods = 50;
    s.warmup_periods = 0;
    RunResult res;
    rows_of(s, &res);
    ASSERT_TRUE(res.formation_periods());
    EXPECT_LE(*res.formation_periods(), 6u * 6u);
    for (NodeId v = 2; v < 7; ++v) EXPECT_GT(*res.formed_period[v], *res.formed_period[v - 1]);
}

TEST(Engine, BargraphBenchCountsEveryTrial) {
    auto s = experiment_preset("bargraph_matrix");
    s.sweep.clear();
    s.periods = 3;
    RunResult res;
    const auto rows = rows_of(s, &res);
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) EXPECT_EQ(r.counts.total(), 100u);
    const auto l = detail::bench_layout(s.bargraph, s.radio);
    EXPECT_NEAR(distance(l.receiver, l.a), 5.0, 1e-12);
    EXPECT_NEAR(distance(l.receiver, l.b), 5.0, 1e-12);
    EXPECT_FALSE(l.interferer);
    s.bargraph.interferer_db = -7.0;
    const auto l2 = detail::bench_layout(s.bargraph, s.radio);
    ASSERT_TRUE(l2.interferer);
    EXPECT_NEAR(received_power(0, 5.0, 2.0) - received_power(0, distance(l2.receiver, *l2.interferer), 2.0), 7.0,
                1e-9);
}

TEST(Engine, InvalidScenarioThrowsBeforeRunning) {
    auto s = experiment_preset("multi_hop_line");
    s.tdma_slots = 10;
    MemorySink mem;
    EXPECT_THROW(run_scenario(s, mem), ValidationError);
    EXPECT_TRUE(mem.rows.empty());
}

TEST(Report, SweepKeepsGridOrderAcrossWorkers) {
    auto s = experiment_preset("single_hop_sweep");
    s.periods = 20;
    const auto one = run_sweep(s, OutputFormat::Csv, 1);
    const auto three = run_sweep(s, OutputFormat::Csv, 3);
    ASSERT_EQ(one.size(), 6u);
    for (std::size_t i = 0; i < one.size(); ++i) {
        EXPECT_EQ(one[i].point.tag(), three[i].point.tag());
        EXPECT_EQ(one[i].run.text, three[i].run.text);
    }
    EXPECT_EQ(render_aggregate(one), render_aggregate(three));
    s.sweep.clear();
    EXPECT_THROW(run_sweep(s, OutputFormat::Csv), ValidationError);
}

TEST(Report, JsonlEndsWithSummary) {
    auto s = experiment_preset("full_scheme");
    s.periods = 25;
    s.warmup_periods = 5;
    const auto r = render_run(s, OutputFormat::Jsonl);
    const auto last = r.text.substr(r.text.rfind('\n', r.text.size() - 2) + 1);
    const auto j = nlohmann::json::parse(last);
    ASSERT_TRUE(j.contains("summary"));
    EXPECT_TRUE(j["summary"].contains("compensation"));
    EXPECT_EQ(std::count(r.text.begin(), r.text.end(), '\n'), 25 * 6 * 2 + 1);
}
