#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfsync/bargraph_codec.hpp"
#include "rfsync/radio_channel.hpp"

namespace rfsync {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Classification : std::uint8_t { Correct, FalsePositive, Failed, Lost };

inline const char* to_string(Classification c) {
    switch (c) {
    case Classification::Correct: return "correct";
    case Classification::FalsePositive: return "false_positive";
    case Classification::Failed: return "failed";
    case Classification::Lost: return "lost";
    }
    return "?";
}

/// Category of one bar-graph reception given the transmitted value range.
inline Classification classify_reception(unsigned expected_min, unsigned expected_max,
                                         const DecodeResult& decoded, bool received) {
    if (!received) return Classification::Lost;
    if (!decoded.valid()) return Classification::Failed;
    const unsigned v = *decoded.value;
    return v >= expected_min && v <= expected_max ? Classification::Correct
                                                  : Classification::FalsePositive;
}

struct ClassCounts {
    std::uint64_t correct = 0;
    std::uint64_t false_positive = 0;
    std::uint64_t failed = 0;
    std::uint64_t lost = 0;

    void add(Classification c) {
        switch (c) {
        case Classification::Correct: ++correct; break;
        case Classification::FalsePositive: ++false_positive; break;
        case Classification::Failed: ++failed; break;
        case Classification::Lost: ++lost; break;
        }
    }
    void merge(const ClassCounts& o) {
        correct += o.correct;
        false_positive += o.false_positive;
        failed += o.failed;
        lost += o.lost;
    }
    std::uint64_t total() const { return correct + false_positive + failed + lost; }
    double pct(std::uint64_t x) const { return total() ? 100.0 * static_cast<double>(x) / static_cast<double>(total()) : kNaN; }
};

/// One output row: the state of one node at the probe instant of one
/// period. Missing quantities are NaN.
struct MetricsRecord {
    std::size_t period = 0;
    NodeId node = 0;
    int hop = 0;
    bool compensation = true;
    double true_delay_ns = kNaN;
    double estimate_ns = kNaN;  // raw cumulated estimate accepted this period
    double c_applied_ns = kNaN; // filter output
    double estimation_error_ns = kNaN;
    double sync_error_ns = kNaN;
    ClassCounts counts;
};

class MetricsSink {
public:
    virtual ~MetricsSink() = default;
    virtual void on_record(const MetricsRecord& r) = 0;
};

class MemorySink : public MetricsSink {
public:
    void on_record(const MetricsRecord& r) override { rows.push_back(r); }
    std::vector<MetricsRecord> rows;
};

// ---------------------------------------------------------------------------
// Serialization

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> c{
        "period",      "node",          "hop",          "compensation",        "true_delay_ns",
        "estimate_ns", "c_applied_ns",  "estimation_error_ns", "sync_error_ns", "correct",
        "false_positive", "failed",     "lost"};
    return c;
}

inline std::string format_number(double x) {
    if (std::isnan(x)) return "";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}

inline void write_csv_header(std::ostream& os) {
    const auto& c = csv_columns();
    for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
    os << '\n';
}

inline void write_csv_row(std::ostream& os, const MetricsRecord& r) {
    os << r.period << ',' << r.node << ',' << r.hop << ',' << (r.compensation ? 1 : 0) << ','
       << format_number(r.true_delay_ns) << ',' << format_number(r.estimate_ns) << ','
       << format_number(r.c_applied_ns) << ',' << format_number(r.estimation_error_ns) << ','
       << format_number(r.sync_error_ns) << ',' << r.counts.correct << ',' << r.counts.false_positive
       << ',' << r.counts.failed << ',' << r.counts.lost << '\n';
}

namespace detail {
// Rounded to the CSV precision so both formats carry the same numbers.
inline nlohmann::ordered_json json_number(double x) {
    if (std::isnan(x)) return nullptr;
    const double r = std::round(x * 1000.0) / 1000.0;
    return r == 0.0 ? 0.0 : r;
}
} // namespace detail

inline nlohmann::ordered_json record_to_json(const MetricsRecord& r) {
    nlohmann::ordered_json j;
    j["period"] = r.period;
    j["node"] = r.node;
    j["hop"] = r.hop;
    j["compensation"] = r.compensation ? 1 : 0;
    j["true_delay_ns"] = detail::json_number(r.true_delay_ns);
    j["estimate_ns"] = detail::json_number(r.estimate_ns);
    j["c_applied_ns"] = detail::json_number(r.c_applied_ns);
    j["estimation_error_ns"] = detail::json_number(r.estimation_error_ns);
    j["sync_error_ns"] = detail::json_number(r.sync_error_ns);
    j["correct"] = r.counts.correct;
    j["false_positive"] = r.counts.false_positive;
    j["failed"] = r.counts.failed;
    j["lost"] = r.counts.lost;
    return j;
}

class CsvSink : public MetricsSink {
public:
    explicit CsvSink(std::ostream& os) : os_(os) { write_csv_header(os_); }
    void on_record(const MetricsRecord& r) override { write_csv_row(os_, r); }

private:
    std::ostream& os_;
};

class JsonlSink : public MetricsSink {
public:
    explicit JsonlSink(std::ostream& os) : os_(os) {}
    void on_record(const MetricsRecord& r) override { os_ << record_to_json(r).dump() << '\n'; }

private:
    std::ostream& os_;
};

/// Forwards every row to several sinks.
class TeeSink : public MetricsSink {
public:
    explicit TeeSink(std::vector<MetricsSink*> sinks) : sinks_(std::move(sinks)) {}
    void on_record(const MetricsRecord& r) override {
        for (auto* s : sinks_) s->on_record(r);
    }

private:
    std::vector<MetricsSink*> sinks_;
};

// ---------------------------------------------------------------------------
// Summaries, computed from rows alone

struct RunningStats {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double stddev() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
    double mean_or_nan() const { return n ? mean : kNaN; }
};

struct HopSummary {
    int hop = 0;
    RunningStats error_ns;    // c_applied - true delay
    RunningStats relative;    // (c_applied - true) / true
    RunningStats true_delay_ns;
};

struct CompensationComparison {
    NodeId probe = 0;
    RunningStats on_ns;
    RunningStats off_ns;
    double difference_ns() const { return off_ns.mean_or_nan() - on_ns.mean_or_nan(); }
};

struct Summary {
    std::size_t warmup_periods = 0;
    std::vector<HopSummary> hops; // ascending hop, hop >= 1
    RunningStats error_ns;        // all non-master rows
    ClassCounts counts;
    std::optional<CompensationComparison> comparison;
    /// Latest period at which some node's |estimation error| was still above
    /// the settle band; nullopt when no row ever settles.
    std::optional<std::size_t> settle_period;
};

/// Per-hop error statistics use rows with period >= warmup from the
/// compensated run. Classification counts use every row. The comparison is
/// filled when rows of both runs exist for `probe`.
inline Summary summarize(const std::vector<MetricsRecord>& rows, std::size_t warmup,
                         std::optional<NodeId> probe, double settle_band_ns = 84.0) {
    Summary s;
    s.warmup_periods = warmup;
    std::map<int, HopSummary> hops;
    CompensationComparison cmp;
    bool has_on = false, has_off = false;
    std::map<NodeId, std::optional<std::size_t>> last_unsettled;
    bool any_settled = false;

    for (const auto& r : rows) {
        if (r.compensation) s.counts.merge(r.counts);
        if (probe && r.node == *probe && r.period >= warmup && !std::isnan(r.sync_error_ns)) {
            (r.compensation ? cmp.on_ns : cmp.off_ns).add(r.sync_error_ns);
            (r.compensation ? has_on : has_off) = true;
        }
        if (!r.compensation || r.hop < 1) continue;
        auto& last = last_unsettled[r.node];
        if (std::isnan(r.estimation_error_ns) || std::abs(r.estimation_error_ns) > settle_band_ns)
            last = r.period;
        else
            any_settled = true;
        if (r.period < warmup || std::isnan(r.estimation_error_ns)) continue;
        auto& h = hops[r.hop];
        h.hop = r.hop;
        h.error_ns.add(r.estimation_error_ns);
        h.true_delay_ns.add(r.true_delay_ns);
        if (r.true_delay_ns > 0) h.relative.add(r.estimation_error_ns / r.true_delay_ns);
        s.error_ns.add(r.estimation_error_ns);
    }
    for (auto& [k, h] : hops) s.hops.push_back(h);
    if (probe && has_on && has_off) {
        cmp.probe = *probe;
        s.comparison = cmp;
    }
    if (any_settled) {
        std::size_t worst = 0;
        for (const auto& [node, last] : last_unsettled)
            if (last) worst = std::max(worst, *last + 1);
        s.settle_period = worst;
    }
    return s;
}

/// Summary block as '#'-prefixed lines, appended after the CSV rows.
inline void write_summary_text(std::ostream& os, const Summary& s) {
    os << "# summary (periods >= " << s.warmup_periods << ")\n";
    if (!s.hops.empty()) {
        os << "# hop,rows,true_delay_mean_ns,error_mean_ns,error_std_ns,relative_error_mean_pct\n";
        for (const auto& h : s.hops)
            os << "# " << h.hop << ',' << h.error_ns.n << ',' << format_number(h.true_delay_ns.mean_or_nan())
               << ',' << format_number(h.error_ns.mean_or_nan()) << ',' << format_number(h.error_ns.stddev())
               << ',' << format_number(100.0 * h.relative.mean_or_nan()) << '\n';
    }
    const auto& c = s.counts;
    if (c.total()) {
        os << "# receptions,correct_pct,false_positive_pct,failed_pct,lost_pct\n";
        os << "# " << c.total() << ',' << format_number(c.pct(c.correct)) << ','
           << format_number(c.pct(c.false_positive)) << ',' << format_number(c.pct(c.failed)) << ','
           << format_number(c.pct(c.lost)) << '\n';
    }
    if (s.comparison) {
        const auto& k = *s.comparison;
        os << "# sync_error at node " << k.probe << ",mean_ns,std_ns,rows\n";
        os << "# compensation off," << format_number(k.off_ns.mean_or_nan()) << ','
           << format_number(k.off_ns.stddev()) << ',' << k.off_ns.n << '\n';
        os << "# compensation on," << format_number(k.on_ns.mean_or_nan()) << ','
           << format_number(k.on_ns.stddev()) << ',' << k.on_ns.n << '\n';
        os << "# difference (off - on)," << format_number(k.difference_ns()) << ",,\n";
    }
}

inline nlohmann::ordered_json summary_to_json(const Summary& s) {
    using detail::json_number;
    nlohmann::ordered_json j;
    j["warmup_periods"] = s.warmup_periods;
    auto hops = nlohmann::ordered_json::array();
    for (const auto& h : s.hops) {
        nlohmann::ordered_json o;
        o["hop"] = h.hop;
        o["rows"] = h.error_ns.n;
        o["true_delay_mean_ns"] = json_number(h.true_delay_ns.mean_or_nan());
        o["error_mean_ns"] = json_number(h.error_ns.mean_or_nan());
        o["error_std_ns"] = json_number(h.error_ns.stddev());
        o["relative_error_mean_pct"] = json_number(100.0 * h.relative.mean_or_nan());
        hops.push_back(o);
    }
    j["hops"] = hops;
    const auto& c = s.counts;
    j["classification"] = {{"receptions", c.total()},
                           {"correct_pct", json_number(c.pct(c.correct))},
                           {"false_positive_pct", json_number(c.pct(c.false_positive))},
                           {"failed_pct", json_number(c.pct(c.failed))},
                           {"lost_pct", json_number(c.pct(c.lost))}};
    if (s.comparison) {
        const auto& k = *s.comparison;
        j["compensation"] = {{"probe_node", k.probe},
                             {"off_mean_ns", json_number(k.off_ns.mean_or_nan())},
                             {"off_std_ns", json_number(k.off_ns.stddev())},
                             {"on_mean_ns", json_number(k.on_ns.mean_or_nan())},
                             {"on_std_ns", json_number(k.on_ns.stddev())},
                             {"difference_ns", json_number(k.difference_ns())}};
    }
    return j;
}

} // namespace rfsync
