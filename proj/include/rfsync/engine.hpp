#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rfsync/bargraph_codec.hpp"
#include "rfsync/clock_sync.hpp"
#include "rfsync/delay_protocol.hpp"
#include "rfsync/event_queue.hpp"
#include "rfsync/flooding.hpp"
#include "rfsync/metrics.hpp"
#include "rfsync/radio_channel.hpp"
#include "rfsync/rng.hpp"
#include "rfsync/scenario.hpp"

namespace rfsync {

struct EngineStats {
    std::size_t floods = 0;
    std::size_t measurements = 0;
    std::size_t accepted = 0;
    std::size_t rejected_sanity = 0;
    std::size_t no_response = 0;
    std::size_t lost = 0;
    std::size_t invalid = 0;
    std::size_t transmissions = 0;
    std::size_t receptions = 0;
    std::size_t hop_address_violations = 0;
    std::size_t response_timing_violations = 0;
    std::size_t ramp_clamps = 0;
    std::uint64_t events_dispatched = 0;
    MonotonicityReport monotonicity;
};

struct RunResult {
    EngineStats stats;
    FloodingGraph graph;
    std::vector<std::optional<std::size_t>> formed_period; // by node id
    std::size_t rows = 0;

    /// Largest period index at which a node became formed; nullopt if some
    /// node never formed.
    std::optional<std::size_t> formation_periods() const {
        std::size_t worst = 0;
        for (const auto& f : formed_period) {
            if (!f) return std::nullopt;
            worst = std::max(worst, *f + 1);
        }
        return worst;
    }
};

namespace detail {

inline std::vector<Rng> make_streams(std::uint64_t seed, std::size_t n, Stream stream) {
    std::vector<Rng> v;
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) v.emplace_back(seed, i, stream);
    return v;
}

class CountingSink : public MetricsSink {
public:
    explicit CountingSink(MetricsSink& inner) : inner_(inner) {}
    void on_record(const MetricsRecord& r) override {
        ++count;
        inner_.on_record(r);
    }
    std::size_t count = 0;

private:
    MetricsSink& inner_;
};

// Ticks checked densely after each clock update; the steepest part of a ramp.
inline constexpr std::size_t kDenseMonotonicityTicks = 256;

inline RunResult run_network(const Scenario& sc, MetricsSink& out) {
    CountingSink sink(out);
    RunResult res;
    res.graph = assign_hops(sc.positions, sc.master, sc.radio);
    const FloodingGraph& graph = res.graph;
    const ProtocolParams prot = sc.protocol();
    const SyncSchemeModel scheme = sc.sync_scheme();
    const std::size_t n = graph.size();
    const SimTime T = ps_from_seconds(sc.period_s);
    const SimTime relay = ps_from_seconds(sc.flood_relay_delay_s);
    auto& stats = res.stats;

    std::vector<ProtocolNode> nodes(n);
    for (NodeId i = 0; i < n; ++i) {
        Rng r(sc.seed, i, Stream::ClockSkew);
        const double skew = i == sc.master ? 0.0 : r.uniform(-sc.clock_skew_ppm, sc.clock_skew_ppm);
        const SimTime offset = ps_from_seconds(r.uniform(0.0, 1.0));
        ProtocolNode& p = nodes[i];
        p.id = i;
        p.hop = graph.hop[i];
        p.position = graph.positions[i];
        p.clock = HardwareClock(skew, prot.tick, offset);
        p.filter = CompensationFilter(sc.filter_pole);
        p.formed = i == sc.master;
    }
    res.formed_period.assign(n, std::nullopt);
    res.formed_period[sc.master] = 0;

    std::vector<VirtualClock> vclock(n, VirtualClock(sc.slope_floor));
    auto flood_rng = make_streams(sc.seed, n, Stream::FloodJitter);
    auto meas_rng = make_streams(sc.seed, n, Stream::MeasurementJitter);
    auto resid_rng = make_streams(sc.seed, n, Stream::SyncResidual);

    std::vector<NodeId> slaves;
    for (NodeId i = 0; i < n; ++i)
        if (i != sc.master) slaves.push_back(i);
    const TdmaSchedule tdma(slaves, sc.tdma_slots);

    std::vector<double> true_delay_ns(n, kNaN);
    std::vector<double> estimate_ns(n, kNaN);
    std::vector<ClassCounts> counts(n);

    auto check_monotonic = [&](NodeId v, SimTime from) {
        stats.monotonicity.merge(
            sample_monotonicity(vclock[v], from, from + T, prot.tick, kDenseMonotonicityTicks));
    };

    EventQueue q;
    const SimTime window = ps_from_seconds(sc.window_offset_s);
    const SimTime spacing = ps_from_seconds(sc.slot_spacing_s());
    const SimTime probe_at = T - ps_from_seconds(1e-3);

    for (std::size_t period = 0; period < sc.periods; ++period) {
        const SimTime t0 = static_cast<SimTime>(period) * T;

        q.schedule(t0, [&, period](SimTime t) {
            (void)period;
            ++stats.floods;
            const auto rx = simulate_flood(graph, t, sc.radio, relay,
                                           [&](NodeId v) -> Rng& { return flood_rng[v]; });
            for (NodeId v : slaves) {
                const double residual = scheme.draw_residual(resid_rng[v]);
                if (!rx[v].received) continue;
                true_delay_ns[v] = ns_from_ps(rx[v].true_delay);
                vclock[v].sync(rx[v].arrival, seconds_from_ps(rx[v].timing_offset) + residual, T);
                check_monotonic(v, rx[v].arrival);
            }
        });

        for (std::size_t slot = 0; slot < sc.tdma_slots; ++slot) {
            q.schedule(t0 + window + static_cast<SimTime>(slot) * spacing, [&, period, slot](SimTime t) {
                const NodeId ini = tdma.initiator(period, slot);
                const auto tr = initiate_measurement(ini, graph, std::span<const ProtocolNode>(nodes), prot,
                                                     sc.radio, t,
                                                     [&](NodeId v) -> Rng& { return meas_rng[v]; });
                ++stats.measurements;
                stats.transmissions += tr.transmissions;
                stats.receptions += tr.receptions;
                for (const auto& r : tr.responses) {
                    if (r.hop != tr.target_hop) ++stats.hop_address_violations;
                    if (r.response_tx - r.request_rx != prot.tau_w) ++stats.response_timing_violations;
                }
                switch (tr.status) {
                case MeasurementStatus::NoResponse: ++stats.no_response; return;
                case MeasurementStatus::Lost:
                    ++stats.lost;
                    counts[ini].add(Classification::Lost);
                    return;
                case MeasurementStatus::Invalid:
                    ++stats.invalid;
                    counts[ini].add(Classification::Failed);
                    return;
                case MeasurementStatus::Sample: break;
                }
                counts[ini].add(
                    classify_reception(tr.expected_min, tr.expected_max, tr.sample->decoded, true));
                const auto est = absorb_sample(nodes[ini], *tr.sample, prot);
                if (!est) {
                    ++stats.rejected_sanity;
                    return;
                }
                ++stats.accepted;
                estimate_ns[ini] = est->cumulated_s * 1e9;
                if (!res.formed_period[ini]) res.formed_period[ini] = period;
                if (sc.compensation) {
                    vclock[ini].apply_correction(tr.finished_at, nodes[ini].filter.applied(), sc.period_s);
                    check_monotonic(ini, tr.finished_at);
                }
            });
        }

        q.schedule(t0 + probe_at, [&, period](SimTime t) {
            for (NodeId v : slaves) {
                MetricsRecord r;
                r.period = period;
                r.node = v;
                r.hop = nodes[v].hop;
                r.compensation = sc.compensation;
                r.true_delay_ns = true_delay_ns[v];
                r.estimate_ns = estimate_ns[v];
                if (nodes[v].formed) {
                    r.c_applied_ns = nodes[v].filter.applied() * 1e9;
                    r.estimation_error_ns = r.c_applied_ns - r.true_delay_ns;
                }
                if (vclock[v].synced()) r.sync_error_ns = vclock[v].sync_error(t) * 1e9;
                r.counts = counts[v];
                sink.on_record(r);
                estimate_ns[v] = kNaN;
                counts[v] = {};
            }
        });
    }
    q.run();

    stats.events_dispatched = q.dispatched();
    for (const auto& c : vclock) stats.ramp_clamps += c.clamp_count();
    res.rows = sink.count;
    return res;
}

/// Placement of the bar-graph bench: receiver at the origin, the two
/// senders at equal distance, the interferer farther out on the same side
/// so that it arrives `interferer_db` below them.
struct BenchLayout {
    NodePosition receiver{0, 0};
    NodePosition a, b;
    std::optional<NodePosition> interferer; // nullopt when off or out of range
};

inline BenchLayout bench_layout(const BargraphBench& bench, const RadioParams& radio) {
    const double d = bench.receiver_distance_m;
    const double angle = 0.1;
    BenchLayout l;
    l.a = {d * std::cos(angle), d * std::sin(angle)};
    l.b = {d * std::cos(angle), -d * std::sin(angle)};
    if (bench.interferer_db) {
        const double di = d * std::pow(10.0, -*bench.interferer_db / (10.0 * radio.path_loss_exponent));
        if (di <= radio.radio_range_m) l.interferer = NodePosition{di, 0.0};
    }
    return l;
}

inline constexpr NodeId kBenchReceiver = 3;

inline RunResult run_bargraph(const Scenario& sc, MetricsSink& out) {
    CountingSink sink(out);
    RunResult res;
    const auto& bench = sc.bargraph;
    const auto layout = bench_layout(bench, sc.radio);
    const std::size_t nibbles = bench.payload_bytes * 2;
    const auto pa = bargraph::encode(bench.value_a, nibbles);
    const auto pb = bargraph::encode(bench.value_b, nibbles);
    const auto pi = bargraph::encode(bench.interferer_value, nibbles);
    const unsigned lo = std::min(bench.value_a, bench.value_b);
    const unsigned hi = std::max(bench.value_a, bench.value_b);
    const SimTime skew = ps_from_seconds(bench.skew_s);
    const SimTime T = ps_from_seconds(sc.period_s);
    const SimTime trial_spacing = T / static_cast<SimTime>(bench.trials_per_period + 1);
    Rng rng(sc.seed, kBenchReceiver, Stream::Bargraph);
    auto& stats = res.stats;

    EventQueue q;
    for (std::size_t period = 0; period < sc.periods; ++period) {
        q.schedule(static_cast<SimTime>(period) * T, [&, period](SimTime t0) {
            ClassCounts counts;
            for (std::size_t k = 0; k < bench.trials_per_period; ++k) {
                const SimTime t = t0 + static_cast<SimTime>(k) * trial_spacing;
                std::vector<TransmissionEvent> air{
                    {0, layout.a, PacketKind::Bargraph, pa, t},
                    {1, layout.b, PacketKind::Bargraph, pb, t + skew},
                };
                if (layout.interferer) air.push_back({2, *layout.interferer, PacketKind::Bargraph, pi, t});
                stats.transmissions += air.size();
                ++stats.receptions;
                const auto outcome = resolve_reception(layout.receiver, air, sc.radio, rng);
                const DecodeResult decoded = outcome.received()
                                                 ? bargraph::decode(*outcome.payload, sc.threshold)
                                                 : DecodeResult::invalid(0, 0);
                counts.add(classify_reception(lo, hi, decoded, outcome.received()));
            }
            MetricsRecord r;
            r.period = period;
            r.node = kBenchReceiver;
            r.hop = 1;
            r.compensation = sc.compensation;
            r.counts = counts;
            sink.on_record(r);
        });
    }
    q.run();
    stats.events_dispatched = q.dispatched();
    res.rows = sink.count;
    return res;
}

} // namespace detail

/// Run one scenario, streaming one row per node and period to `sink`.
/// Throws ValidationError listing every problem if the scenario is invalid.
inline RunResult run_scenario(const Scenario& sc, MetricsSink& sink) {
    sc.validate();
    return sc.mode == ScenarioMode::Bargraph ? detail::run_bargraph(sc, sink) : detail::run_network(sc, sink);
}

struct ComparedRun {
    RunResult on;
    std::optional<RunResult> off;
};

/// As run_scenario; when compare_compensation is set, follows with a
/// seed-paired run with compensation disabled. Rows carry the flag.
inline ComparedRun run_with_comparison(const Scenario& sc, MetricsSink& sink) {
    ComparedRun out;
    Scenario on = sc;
    if (sc.compare_compensation) on.compensation = true;
    out.on = run_scenario(on, sink);
    if (sc.compare_compensation && sc.mode == ScenarioMode::Network) {
        Scenario off = sc;
        off.compensation = false;
        out.off = run_scenario(off, sink);
    }
    return out;
}

/// Summary over the rows of a run using the scenario's warm-up and probe.
inline Summary summarize_run(const Scenario& sc, const std::vector<MetricsRecord>& rows) {
    std::optional<NodeId> probe;
    if (sc.mode == ScenarioMode::Network) probe = sc.resolved_probe_node(assign_hops(sc.positions, sc.master, sc.radio));
    return summarize(rows, sc.warmup_periods, probe, 2.0 * sc.tick_s * 1e9);
}

} // namespace rfsync
