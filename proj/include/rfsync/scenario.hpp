#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsync/delay_protocol.hpp"
#include "rfsync/flooding.hpp"
#include "rfsync/radio_channel.hpp"
#include "rfsync/units_parse.hpp"

namespace rfsync {

class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid scenario:";
        for (const auto& x : p) s += "\n  - " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

enum class ScenarioMode { Network, Bargraph };

/// Three-transmitter bar-graph bench: two equal-power senders with similar
/// values skewed in time, plus an optional weaker interferer with a
/// different value, all heard by one receiver.
struct BargraphBench {
    double receiver_distance_m = 5.0;
    double skew_s = 80e-9;
    std::optional<double> interferer_db; // relative power; nullopt = off
    std::size_t payload_bytes = 16;
    unsigned value_a = 10;
    unsigned value_b = 13;
    unsigned interferer_value = 24;
    std::size_t trials_per_period = 100;
};

/// One swept parameter. Values are kept as text with their units.
struct SweepAxis {
    std::string name;
    std::vector<std::string> values;
};

inline const std::vector<std::string>& sweep_axis_names() {
    static const std::vector<std::string> names{"distance", "skew", "interferer", "pole",
                                                "payload_bytes", "seed", "tdma_slots"};
    return names;
}

struct Scenario {
    std::string name = "custom";
    ScenarioMode mode = ScenarioMode::Network;

    std::vector<NodePosition> positions;
    NodeId master = 0;
    RadioParams radio;

    double tick_s = 42e-9;
    double tau_w_s = 192e-6;
    std::size_t tdma_slots = 1;
    double period_s = 60.0;
    double filter_pole = 0.75;
    unsigned threshold = bargraph::kDefaultThreshold;
    double residual_std_s = 150e-9;
    std::size_t periods = 100;
    std::size_t warmup_periods = 0;
    std::uint64_t seed = 1;
    bool compensation = true;
    bool compare_compensation = false; // also run with compensation off, same seed
    double slope_floor = 0.5;
    std::size_t response_payload_bytes = 127;
    double sanity_margin_s = 84e-9;
    double guard_gap_s = 5e-3;
    double window_offset_s = 20e-3;
    double flood_relay_delay_s = 512e-6;
    double clock_skew_ppm = 20.0; // per-node skew drawn from [-x, x]
    std::optional<NodeId> probe_node;

    BargraphBench bargraph;
    std::vector<SweepAxis> sweep;

    ProtocolParams protocol() const {
        ProtocolParams p;
        p.tick = ps_from_seconds(tick_s);
        p.tau_w = ps_from_seconds(tau_w_s);
        p.sfd_lag_nominal_s = radio.sfd_detection_lag_s;
        p.radio_range_m = radio.radio_range_m;
        p.sanity_margin_s = sanity_margin_s;
        p.response_payload_bytes = response_payload_bytes;
        p.threshold = threshold;
        return p;
    }

    SyncSchemeModel sync_scheme() const { return {period_s, residual_std_s}; }

    /// Spacing between consecutive TDMA slots of the reserved window.
    double slot_spacing_s() const {
        return guard_gap_s + tau_w_s
               + seconds_from_ps(frame_airtime(response_payload_bytes, radio)) * 2.0;
    }

    std::size_t slave_count() const { return positions.size() > 0 ? positions.size() - 1 : 0; }

    /// Node whose sync error is compared with and without compensation:
    /// explicit, or the first node at the deepest hop.
    NodeId resolved_probe_node(const FloodingGraph& g) const {
        if (probe_node) return *probe_node;
        const int h = g.max_hop();
        for (NodeId i = 0; i < g.size(); ++i)
            if (g.hop[i] == h) return i;
        return master;
    }

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        for (auto& r : radio.violations()) v.push_back("radio." + r);
        if (!(tick_s > 0)) v.emplace_back("tick must be > 0");
        if (!(period_s > 0)) v.emplace_back("period must be > 0");
        if (periods < 1) v.emplace_back("periods must be >= 1");
        if (warmup_periods >= periods) v.emplace_back("warmup_periods must be < periods");
        if (!(filter_pole >= 0 && filter_pole < 1)) v.emplace_back("filter_pole must be in [0, 1)");
        if (!(slope_floor >= 0 && slope_floor < 1)) v.emplace_back("slope_floor must be in [0, 1)");
        if (!(residual_std_s >= 0)) v.emplace_back("residual_std must be >= 0");
        if (!(clock_skew_ppm >= 0 && clock_skew_ppm < 1e4)) v.emplace_back("clock_skew_ppm must be in [0, 1e4)");

        if (mode == ScenarioMode::Bargraph) {
            const auto& b = bargraph;
            if (b.payload_bytes < 1 || b.payload_bytes > 127)
                v.emplace_back("bargraph.payload_bytes must be in [1, 127]");
            const std::size_t nib = b.payload_bytes * 2;
            if (b.value_a > nib || b.value_b > nib || b.interferer_value > nib)
                v.emplace_back("bargraph values must fit the payload (<= " + std::to_string(nib) + ")");
            if (!(b.receiver_distance_m > 0)) v.emplace_back("bargraph.receiver_distance must be > 0");
            if (b.receiver_distance_m > radio.radio_range_m)
                v.emplace_back("bargraph.receiver_distance exceeds the radio range");
            if (!(b.skew_s >= 0)) v.emplace_back("bargraph.skew must be >= 0");
            if (b.interferer_db && !(*b.interferer_db <= 0))
                v.emplace_back("bargraph.interferer must be <= 0 dB (relative) or \"off\"");
            if (b.trials_per_period < 1) v.emplace_back("bargraph.trials_per_period must be >= 1");
            if (threshold > nib) v.emplace_back("threshold exceeds the bar-graph payload size");
        } else {
            if (!(tau_w_s > 0)) v.emplace_back("tau_w must be > 0");
            if (positions.size() < 2) v.emplace_back("network needs a master and at least one node");
            if (master >= positions.size()) v.emplace_back("master id out of range");
            const std::size_t n = slave_count();
            if (n >= 1 && (tdma_slots < 1 || tdma_slots > n))
                v.emplace_back("TDMA constraint violated: tdma_slots (s = " + std::to_string(tdma_slots)
                               + ") must satisfy 1 <= s <= n (n = " + std::to_string(n) + " nodes)");
            if (response_payload_bytes < 1 || response_payload_bytes > 127)
                v.emplace_back("response_payload_bytes must be in [1, 127]");
            if (threshold > response_payload_bytes * 2)
                v.emplace_back("threshold exceeds the response payload size");
            if (!(sanity_margin_s >= 0)) v.emplace_back("sanity_margin must be >= 0");
            if (!(guard_gap_s >= 0)) v.emplace_back("guard_gap must be >= 0");
            if (!(window_offset_s >= 0)) v.emplace_back("window_offset must be >= 0");
            if (!(flood_relay_delay_s >= 0)) v.emplace_back("flood_relay_delay must be >= 0");
            if (probe_node && *probe_node >= positions.size()) v.emplace_back("probe_node out of range");
            if (period_s > 0 && tdma_slots >= 1
                && window_offset_s + static_cast<double>(tdma_slots) * slot_spacing_s() + 2e-3 >= period_s)
                v.emplace_back("reserved window (" + std::to_string(tdma_slots)
                               + " slots) does not fit in one period");
            if (radio.violations().empty() && master < positions.size() && !positions.empty()) {
                try {
                    const auto g = assign_hops(positions, master, radio);
                    const double flood_end =
                        g.max_hop() * (flood_relay_delay_s + 2 * seconds_from_ps(frame_airtime(2, radio)));
                    if (flood_end >= window_offset_s)
                        v.emplace_back("flood across " + std::to_string(g.max_hop())
                                       + " hops does not finish before the reserved window");
                } catch (const std::exception& e) {
                    v.emplace_back(std::string("topology: ") + e.what());
                }
            }
        }
        for (const auto& axis : sweep) {
            const auto& known = sweep_axis_names();
            if (std::find(known.begin(), known.end(), axis.name) == known.end())
                v.emplace_back("sweep axis '" + axis.name + "' is not one of distance, skew, "
                               "interferer, pole, payload_bytes, seed, tdma_slots");
            if (axis.values.empty()) v.emplace_back("sweep axis '" + axis.name + "' has no values");
        }
        return v;
    }

    void validate() const {
        auto v = violations();
        if (!v.empty()) throw ValidationError(std::move(v));
    }
};

// ---------------------------------------------------------------------------
// Sweeps

namespace detail {
inline std::size_t parse_count(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    if (s.empty() || !std::isdigit(static_cast<unsigned char>(s.front())))
        throw UnitError(what + ": '" + s + "' is not a non-negative integer");
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        throw UnitError(what + ": '" + s + "' is not a non-negative integer");
    }
    if (pos != s.size()) throw UnitError(what + ": '" + s + "' is not a non-negative integer");
    return static_cast<std::size_t>(v);
}
} // namespace detail

/// Set one sweep axis on a scenario.
inline void apply_axis(Scenario& s, const std::string& axis, const std::string& value) {
    if (axis == "distance") {
        const double d = parse_quantity(value, Dimension::Length);
        if (s.mode == ScenarioMode::Bargraph) {
            s.bargraph.receiver_distance_m = d;
        } else {
            // rescale the layout around the master so node 1 ends up at d
            if (s.positions.size() < 2) throw UnitError("distance axis needs at least two nodes");
            const NodeId ref = s.master == 1 ? 0 : 1;
            const NodePosition m = s.positions[s.master];
            const double cur = distance(m, s.positions[ref]);
            if (!(cur > 0)) throw UnitError("distance axis: reference node coincides with master");
            const double k = d / cur;
            for (auto& p : s.positions) p = {m.x + (p.x - m.x) * k, m.y + (p.y - m.y) * k};
        }
    } else if (axis == "skew") {
        s.bargraph.skew_s = parse_quantity(value, Dimension::Time);
    } else if (axis == "interferer") {
        if (value == "off") s.bargraph.interferer_db.reset();
        else s.bargraph.interferer_db = parse_quantity(value, Dimension::RatioDb);
    } else if (axis == "pole") {
        try {
            s.filter_pole = std::stod(value);
        } catch (const std::exception&) {
            throw UnitError("pole: '" + value + "' is not a number");
        }
    } else if (axis == "payload_bytes") {
        s.bargraph.payload_bytes = detail::parse_count(value, "payload_bytes");
    } else if (axis == "seed") {
        s.seed = detail::parse_count(value, "seed");
    } else if (axis == "tdma_slots") {
        s.tdma_slots = detail::parse_count(value, "tdma_slots");
    } else {
        throw UnitError("unknown sweep axis '" + axis + "'");
    }
}

struct GridPoint {
    std::vector<std::pair<std::string, std::string>> labels; // axis, value
    Scenario scenario;

    std::string tag() const {
        std::string t;
        for (const auto& [k, v] : labels) {
            if (!t.empty()) t += "_";
            t += k + "-" + v;
        }
        return t.empty() ? "base" : t;
    }
};

/// Cartesian product of the scenario's sweep axes, first axis outermost.
inline std::vector<GridPoint> expand_grid(const Scenario& base) {
    std::vector<GridPoint> grid{GridPoint{{}, base}};
    grid.front().scenario.sweep.clear();
    for (const auto& axis : base.sweep) {
        if (axis.values.empty()) throw ValidationError({"sweep axis '" + axis.name + "' has no values"});
        std::vector<GridPoint> next;
        for (const auto& g : grid)
            for (const auto& v : axis.values) {
                GridPoint p = g;
                p.labels.emplace_back(axis.name, v);
                apply_axis(p.scenario, axis.name, v);
                next.push_back(std::move(p));
            }
        grid = std::move(next);
    }
    for (auto& g : grid) {
        if (!g.labels.empty()) g.scenario.name = base.name + "_" + g.tag();
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Presets

inline const std::vector<std::pair<std::string, std::string>>& preset_catalog() {
    static const std::vector<std::pair<std::string, std::string>> c{
        {"single_hop_sweep", "two nodes, 1 sample/s for 300 s, distance swept 10..60 m in 10 m steps"},
        {"multi_hop_line", "seven nodes on a line at 68 m spacing (6 hops), 300 periods"},
        {"bargraph_matrix", "bar-graph bench: 4 skews x 4 interferer levels x 2 payloads x 2 distances"},
        {"full_scheme", "double-diamond, 7 nodes, 272 m path, T = 60 s, compensation on/off comparison"},
    };
    return c;
}

inline Scenario experiment_preset(const std::string& name) {
    Scenario s;
    s.name = name;
    if (name == "single_hop_sweep") {
        s.positions = {{0, 0}, {10, 0}};
        s.tdma_slots = 1;
        s.period_s = 1.0;
        s.periods = 300;
        s.sweep = {{"distance", {"10m", "20m", "30m", "40m", "50m", "60m"}}};
    } else if (name == "multi_hop_line") {
        for (int i = 0; i <= 6; ++i) s.positions.push_back({68.0 * i, 0});
        s.tdma_slots = 6;
        s.periods = 300;
        s.warmup_periods = 10;
    } else if (name == "bargraph_matrix") {
        s.mode = ScenarioMode::Bargraph;
        s.radio.radio_range_m = 150.0;
        s.periods = 20;
        s.bargraph.trials_per_period = 100;
        s.sweep = {{"skew", {"80ns", "160ns", "320ns", "640ns"}},
                   {"interferer", {"off", "-18dB", "-7dB", "-2dB"}},
                   {"payload_bytes", {"16", "64"}},
                   {"distance", {"5m", "60m"}}};
    } else if (name == "full_scheme") {
        // M - {1,2} - 3 - {4,5} - 6, every link 68 m, 272 m end to end
        const double y = 20.0;
        const double x = std::sqrt(68.0 * 68.0 - y * y);
        s.positions = {{0, 0}, {x, y}, {x, -y}, {2 * x, 0}, {3 * x, y}, {3 * x, -y}, {4 * x, 0}};
        s.tdma_slots = 2;
        s.periods = 120;
        s.warmup_periods = 20;
        s.probe_node = 6;
        s.compare_compensation = true;
    } else {
        std::string names;
        for (const auto& [n, d] : preset_catalog()) names += (names.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown preset '" + name + "'; available: " + names);
    }
    return s;
}

} // namespace rfsync
