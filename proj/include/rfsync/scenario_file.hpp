#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "rfsync/scenario.hpp"
#include "rfsync/units_parse.hpp"

namespace rfsync {

/// Problems found while reading a scenario file, each as
/// "source:line:column: field: message".
class ScenarioFileError : public std::runtime_error {
public:
    explicit ScenarioFileError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s;
        for (const auto& x : p) s += (s.empty() ? "" : "\n") + x;
        return s;
    }
    std::vector<std::string> problems_;
};

struct LoadedScenario {
    Scenario scenario;
    std::string source;
    std::map<std::string, int> field_lines; // dotted key -> line

    /// Prefixes a validation problem with the line of the field it names.
    std::string locate(const std::string& problem) const {
        const std::pair<const std::string, int>* best = nullptr;
        for (const auto& kv : field_lines) {
            const auto leaf = kv.first.substr(kv.first.rfind('.') + 1);
            if (problem.find(kv.first) != std::string::npos || problem.find(leaf) != std::string::npos)
                if (!best || kv.first.size() > best->first.size()) best = &kv;
        }
        return best ? source + ":" + std::to_string(best->second) + ": " + problem : source + ": " + problem;
    }
};

namespace detail {

class TomlReader {
public:
    TomlReader(std::string source, LoadedScenario& out) : source_(std::move(source)), out_(out) {}

    void error(const toml::node* at, const std::string& field, const std::string& msg) {
        std::string where = source_;
        if (at) {
            const auto& b = at->source().begin;
            where += ":" + std::to_string(b.line) + ":" + std::to_string(b.column);
        }
        problems_.push_back(where + ": " + field + ": " + msg);
    }

    const toml::node* find(const toml::table& t, const std::string& prefix, std::string_view key) {
        const toml::node* n = t.get(key);
        if (n) out_.field_lines[prefix + std::string(key)] = static_cast<int>(n->source().begin.line);
        return n;
    }

    void quantity(const toml::table& t, const std::string& prefix, std::string_view key, Dimension dim,
                  double& target) {
        const auto* n = find(t, prefix, key);
        if (!n) return;
        const std::string field = prefix + std::string(key);
        if (!n->is_string()) {
            error(n, field, std::string("expected a quoted value with a unit, ") + to_string(dim));
            return;
        }
        try {
            target = parse_quantity(**n->as_string(), dim);
        } catch (const UnitError& e) {
            error(n, field, e.what());
        }
    }

    void number(const toml::table& t, const std::string& prefix, std::string_view key, double& target) {
        const auto* n = find(t, prefix, key);
        if (!n) return;
        if (auto v = n->value<double>()) target = *v;
        else error(n, prefix + std::string(key), "expected a number");
    }

    template <class U>
    void count(const toml::table& t, const std::string& prefix, std::string_view key, U& target) {
        const auto* n = find(t, prefix, key);
        if (!n) return;
        const auto v = n->value<std::int64_t>();
        if (!n->is_integer() || !v || *v < 0) {
            error(n, prefix + std::string(key), "expected a non-negative integer");
            return;
        }
        target = static_cast<U>(*v);
    }

    void boolean(const toml::table& t, const std::string& prefix, std::string_view key, bool& target) {
        const auto* n = find(t, prefix, key);
        if (!n) return;
        if (auto v = n->value<bool>()) target = *v;
        else error(n, prefix + std::string(key), "expected true or false");
    }

    void string(const toml::table& t, const std::string& prefix, std::string_view key, std::string& target) {
        const auto* n = find(t, prefix, key);
        if (!n) return;
        if (auto v = n->value<std::string>()) target = *v;
        else error(n, prefix + std::string(key), "expected a string");
    }

    void reject_unknown(const toml::table& t, const std::string& prefix, const std::set<std::string>& known) {
        for (const auto& [k, v] : t)
            if (!known.count(std::string(k.str())))
                error(&v, prefix + std::string(k.str()), "unknown key");
    }

    std::vector<std::string> take() { return std::move(problems_); }

private:
    std::string source_;
    LoadedScenario& out_;
    std::vector<std::string> problems_;
};

} // namespace detail

/// Parse a scenario from TOML text. Quantities carry units ("192us",
/// "68m", "-7dB"); bare numbers are rejected for them. Keys left out keep
/// their defaults, or those of `preset` when the file names one.
inline LoadedScenario parse_scenario(std::string_view text, const std::string& source = "<scenario>") {
    LoadedScenario out;
    out.source = source;
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        const auto& b = e.source().begin;
        throw ScenarioFileError({source + ":" + std::to_string(b.line) + ":" + std::to_string(b.column)
                                 + ": syntax: " + std::string(e.description())});
    }
    detail::TomlReader rd(source, out);
    Scenario& s = out.scenario;

    if (const auto* p = rd.find(root, "", "preset")) {
        if (auto name = p->value<std::string>()) {
            try {
                s = experiment_preset(*name);
            } catch (const std::invalid_argument& e) {
                rd.error(p, "preset", e.what());
            }
        } else {
            rd.error(p, "preset", "expected a string");
        }
    }

    rd.reject_unknown(root, "",
                      {"preset", "name", "mode", "master", "positions_m", "seed", "periods", "warmup_periods",
                       "tdma_slots", "period", "tick", "tau_w", "filter_pole", "threshold", "residual_std",
                       "compensation", "compare_compensation", "slope_floor", "response_payload_bytes",
                       "sanity_margin", "guard_gap", "window_offset", "flood_relay_delay", "clock_skew_ppm",
                       "probe_node", "radio", "bargraph", "sweep"});

    rd.string(root, "", "name", s.name);
    if (const auto* m = rd.find(root, "", "mode")) {
        const auto v = m->value<std::string>();
        if (v == "network") s.mode = ScenarioMode::Network;
        else if (v == "bargraph") s.mode = ScenarioMode::Bargraph;
        else rd.error(m, "mode", "expected \"network\" or \"bargraph\"");
    }
    rd.count(root, "", "master", s.master);
    if (const auto* pos = rd.find(root, "", "positions_m")) {
        const auto* arr = pos->as_array();
        if (!arr) {
            rd.error(pos, "positions_m", "expected an array of [x, y] pairs in meters");
        } else {
            s.positions.clear();
            for (std::size_t i = 0; i < arr->size(); ++i) {
                const auto* pair = (*arr)[i].as_array();
                const auto x = pair && pair->size() == 2 ? (*pair)[0].value<double>() : std::nullopt;
                const auto y = pair && pair->size() == 2 ? (*pair)[1].value<double>() : std::nullopt;
                if (!x || !y) {
                    rd.error(&(*arr)[i], "positions_m[" + std::to_string(i) + "]", "expected [x, y] in meters");
                    continue;
                }
                s.positions.push_back({*x, *y});
            }
        }
    }
    rd.count(root, "", "seed", s.seed);
    rd.count(root, "", "periods", s.periods);
    rd.count(root, "", "warmup_periods", s.warmup_periods);
    rd.count(root, "", "tdma_slots", s.tdma_slots);
    rd.quantity(root, "", "period", Dimension::Time, s.period_s);
    rd.quantity(root, "", "tick", Dimension::Time, s.tick_s);
    rd.quantity(root, "", "tau_w", Dimension::Time, s.tau_w_s);
    rd.number(root, "", "filter_pole", s.filter_pole);
    rd.count(root, "", "threshold", s.threshold);
    rd.quantity(root, "", "residual_std", Dimension::Time, s.residual_std_s);
    rd.boolean(root, "", "compensation", s.compensation);
    rd.boolean(root, "", "compare_compensation", s.compare_compensation);
    rd.number(root, "", "slope_floor", s.slope_floor);
    rd.count(root, "", "response_payload_bytes", s.response_payload_bytes);
    rd.quantity(root, "", "sanity_margin", Dimension::Time, s.sanity_margin_s);
    rd.quantity(root, "", "guard_gap", Dimension::Time, s.guard_gap_s);
    rd.quantity(root, "", "window_offset", Dimension::Time, s.window_offset_s);
    rd.quantity(root, "", "flood_relay_delay", Dimension::Time, s.flood_relay_delay_s);
    rd.number(root, "", "clock_skew_ppm", s.clock_skew_ppm);
    if (rd.find(root, "", "probe_node")) {
        NodeId probe = 0;
        rd.count(root, "", "probe_node", probe);
        s.probe_node = probe;
    }

    if (const auto* node = rd.find(root, "", "radio")) {
        if (const auto* r = node->as_table()) {
            auto& rp = s.radio;
            rd.reject_unknown(*r, "radio.",
                              {"tx_power", "range", "path_loss_exponent", "capture_window", "skew_tolerance",
                               "symbol_duration", "sfd_lag", "sfd_jitter", "flip_other_prob",
                               "excess_path_delay"});
            rd.quantity(*r, "radio.", "tx_power", Dimension::PowerDbm, rp.tx_power_dbm);
            rd.quantity(*r, "radio.", "range", Dimension::Length, rp.radio_range_m);
            rd.number(*r, "radio.", "path_loss_exponent", rp.path_loss_exponent);
            rd.quantity(*r, "radio.", "capture_window", Dimension::RatioDb, rp.capture_window_db);
            rd.quantity(*r, "radio.", "skew_tolerance", Dimension::Time, rp.skew_tolerance_s);
            rd.quantity(*r, "radio.", "symbol_duration", Dimension::Time, rp.symbol_duration_s);
            rd.quantity(*r, "radio.", "sfd_lag", Dimension::Time, rp.sfd_detection_lag_s);
            rd.quantity(*r, "radio.", "sfd_jitter", Dimension::Time, rp.sfd_jitter_std_s);
            rd.number(*r, "radio.", "flip_other_prob", rp.flip_other_prob);
            rd.quantity(*r, "radio.", "excess_path_delay", Dimension::Time, rp.excess_path_delay_s);
        } else {
            rd.error(node, "radio", "expected a table");
        }
    }

    if (const auto* node = rd.find(root, "", "bargraph")) {
        if (const auto* b = node->as_table()) {
            auto& bp = s.bargraph;
            rd.reject_unknown(*b, "bargraph.",
                              {"receiver_distance", "skew", "interferer", "payload_bytes", "value_a", "value_b",
                               "interferer_value", "trials_per_period"});
            rd.quantity(*b, "bargraph.", "receiver_distance", Dimension::Length, bp.receiver_distance_m);
            rd.quantity(*b, "bargraph.", "skew", Dimension::Time, bp.skew_s);
            if (const auto* i = rd.find(*b, "bargraph.", "interferer")) {
                if (i->value<std::string>() == "off") {
                    bp.interferer_db.reset();
                } else {
                    double db = 0.0;
                    rd.quantity(*b, "bargraph.", "interferer", Dimension::RatioDb, db);
                    bp.interferer_db = db;
                }
            }
            rd.count(*b, "bargraph.", "payload_bytes", bp.payload_bytes);
            rd.count(*b, "bargraph.", "value_a", bp.value_a);
            rd.count(*b, "bargraph.", "value_b", bp.value_b);
            rd.count(*b, "bargraph.", "interferer_value", bp.interferer_value);
            rd.count(*b, "bargraph.", "trials_per_period", bp.trials_per_period);
        } else {
            rd.error(node, "bargraph", "expected a table");
        }
    }

    if (const auto* node = rd.find(root, "", "sweep")) {
        const auto* arr = node->as_array();
        if (!arr || !arr->is_array_of_tables()) {
            rd.error(node, "sweep", "expected [[sweep]] tables with axis and values");
        } else {
            s.sweep.clear();
            for (std::size_t i = 0; i < arr->size(); ++i) {
                const auto& t = *(*arr)[i].as_table();
                const std::string prefix = "sweep[" + std::to_string(i) + "].";
                rd.reject_unknown(t, prefix, {"axis", "values"});
                SweepAxis axis;
                rd.string(t, prefix, "axis", axis.name);
                const auto* vals = rd.find(t, prefix, "values");
                const auto* va = vals ? vals->as_array() : nullptr;
                if (!va) {
                    rd.error(&t, prefix + "values", "expected an array of values");
                } else {
                    for (const auto& v : *va) {
                        if (auto str = v.value<std::string>()) axis.values.push_back(*str);
                        else if (v.is_number()) {
                            std::ostringstream os;
                            os << *v.value<double>();
                            axis.values.push_back(os.str());
                        } else {
                            rd.error(&v, prefix + "values", "expected strings or numbers");
                        }
                    }
                }
                // check each value now so errors point at this file
                Scenario probe = s;
                for (const auto& v : axis.values) {
                    try {
                        apply_axis(probe, axis.name, v);
                    } catch (const UnitError& e) {
                        rd.error(vals, prefix + "values", e.what());
                    }
                }
                s.sweep.push_back(std::move(axis));
            }
        }
    }

    auto problems = rd.take();
    if (!problems.empty()) throw ScenarioFileError(std::move(problems));
    return out;
}

inline LoadedScenario load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioFileError({path + ": cannot open file"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

/// TOML text that parses back to the same scenario.
inline std::string dump_scenario(const Scenario& s) {
    auto q = [](double v, Dimension d) { return format_quantity(v, d); };
    toml::table root;
    root.insert("name", s.name);
    root.insert("mode", s.mode == ScenarioMode::Bargraph ? "bargraph" : "network");
    root.insert("seed", static_cast<std::int64_t>(s.seed));
    root.insert("periods", static_cast<std::int64_t>(s.periods));
    root.insert("warmup_periods", static_cast<std::int64_t>(s.warmup_periods));
    root.insert("period", q(s.period_s, Dimension::Time));
    root.insert("tick", q(s.tick_s, Dimension::Time));
    root.insert("filter_pole", s.filter_pole);
    root.insert("threshold", static_cast<std::int64_t>(s.threshold));
    root.insert("compensation", s.compensation);
    root.insert("compare_compensation", s.compare_compensation);
    root.insert("clock_skew_ppm", s.clock_skew_ppm);
    if (s.mode == ScenarioMode::Network) {
        root.insert("master", static_cast<std::int64_t>(s.master));
        toml::array pos;
        for (const auto& p : s.positions) pos.push_back(toml::array{p.x, p.y});
        root.insert("positions_m", pos);
        root.insert("tdma_slots", static_cast<std::int64_t>(s.tdma_slots));
        root.insert("tau_w", q(s.tau_w_s, Dimension::Time));
        root.insert("residual_std", q(s.residual_std_s, Dimension::Time));
        root.insert("slope_floor", s.slope_floor);
        root.insert("response_payload_bytes", static_cast<std::int64_t>(s.response_payload_bytes));
        root.insert("sanity_margin", q(s.sanity_margin_s, Dimension::Time));
        root.insert("guard_gap", q(s.guard_gap_s, Dimension::Time));
        root.insert("window_offset", q(s.window_offset_s, Dimension::Time));
        root.insert("flood_relay_delay", q(s.flood_relay_delay_s, Dimension::Time));
        if (s.probe_node) root.insert("probe_node", static_cast<std::int64_t>(*s.probe_node));
    }
    const auto& r = s.radio;
    root.insert("radio", toml::table{
                             {"tx_power", q(r.tx_power_dbm, Dimension::PowerDbm)},
                             {"range", q(r.radio_range_m, Dimension::Length)},
                             {"path_loss_exponent", r.path_loss_exponent},
                             {"capture_window", q(r.capture_window_db, Dimension::RatioDb)},
                             {"skew_tolerance", q(r.skew_tolerance_s, Dimension::Time)},
                             {"symbol_duration", q(r.symbol_duration_s, Dimension::Time)},
                             {"sfd_lag", q(r.sfd_detection_lag_s, Dimension::Time)},
                             {"sfd_jitter", q(r.sfd_jitter_std_s, Dimension::Time)},
                             {"flip_other_prob", r.flip_other_prob},
                             {"excess_path_delay", q(r.excess_path_delay_s, Dimension::Time)},
                         });
    if (s.mode == ScenarioMode::Bargraph) {
        const auto& b = s.bargraph;
        root.insert("bargraph",
                    toml::table{
                        {"receiver_distance", q(b.receiver_distance_m, Dimension::Length)},
                        {"skew", q(b.skew_s, Dimension::Time)},
                        {"interferer", b.interferer_db ? q(*b.interferer_db, Dimension::RatioDb) : "off"},
                        {"payload_bytes", static_cast<std::int64_t>(b.payload_bytes)},
                        {"value_a", static_cast<std::int64_t>(b.value_a)},
                        {"value_b", static_cast<std::int64_t>(b.value_b)},
                        {"interferer_value", static_cast<std::int64_t>(b.interferer_value)},
                        {"trials_per_period", static_cast<std::int64_t>(b.trials_per_period)},
                    });
    }
    if (!s.sweep.empty()) {
        toml::array sweeps;
        for (const auto& a : s.sweep) {
            toml::array vals;
            for (const auto& v : a.values) vals.push_back(v);
            sweeps.push_back(toml::table{{"axis", a.name}, {"values", vals}});
        }
        root.insert("sweep", sweeps);
    }
    std::ostringstream os;
    os << root << '\n';
    return os.str();
}

} // namespace rfsync
