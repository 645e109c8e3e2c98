#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rfsync/engine.hpp"
#include "rfsync/metrics.hpp"
#include "rfsync/scenario.hpp"

namespace rfsync {

enum class OutputFormat { Csv, Jsonl };

inline const char* file_extension(OutputFormat f) { return f == OutputFormat::Csv ? ".csv" : ".jsonl"; }

struct RenderedRun {
    std::string text;
    Summary summary;
    ComparedRun result;
};

/// Run a scenario and render its rows followed by the summary block.
inline RenderedRun render_run(const Scenario& sc, OutputFormat fmt) {
    std::ostringstream os;
    MemorySink mem;
    std::optional<CsvSink> csv;
    std::optional<JsonlSink> jsonl;
    MetricsSink* out = nullptr;
    if (fmt == OutputFormat::Csv) out = &csv.emplace(os);
    else out = &jsonl.emplace(os);
    TeeSink tee({&mem, out});

    RenderedRun r;
    r.result = run_with_comparison(sc, tee);
    r.summary = summarize_run(sc, mem.rows);
    if (fmt == OutputFormat::Csv) {
        write_summary_text(os, r.summary);
    } else {
        nlohmann::ordered_json j;
        j["summary"] = summary_to_json(r.summary);
        os << j.dump() << '\n';
    }
    r.text = os.str();
    return r;
}

struct SweepPoint {
    GridPoint point;
    RenderedRun run;
};

/// Run every grid point of the scenario's sweep on `jobs` workers. Results
/// keep grid order regardless of completion order.
inline std::vector<SweepPoint> run_sweep(const Scenario& base, OutputFormat fmt, std::size_t jobs = 1) {
    if (base.sweep.empty())
        throw ValidationError({"sweep: the scenario declares no sweep axis (empty grid)"});
    base.validate();
    auto grid = expand_grid(base);
    if (grid.empty()) throw ValidationError({"sweep: empty grid"});
    for (const auto& g : grid) g.scenario.validate();

    std::vector<SweepPoint> out(grid.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < grid.size();) {
            try {
                out[i] = {grid[i], render_run(grid[i].scenario, fmt)};
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t n = std::clamp<std::size_t>(jobs, 1, grid.size());
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

inline const std::vector<std::string>& aggregate_metric_columns() {
    static const std::vector<std::string> c{
        "rows",           "error_mean_ns",      "error_std_ns",     "relative_error_mean_pct",
        "correct_pct",    "false_positive_pct", "failed_pct",       "lost_pct",
        "sync_off_mean_ns", "sync_on_mean_ns",  "sync_difference_ns", "settle_period"};
    return c;
}

inline std::vector<double> aggregate_values(const Summary& s) {
    const auto& c = s.counts;
    RunningStats rel;
    for (const auto& h : s.hops)
        if (h.relative.n) rel.add(h.relative.mean);
    const auto* k = s.comparison ? &*s.comparison : nullptr;
    return {static_cast<double>(s.error_ns.n),
            s.error_ns.mean_or_nan(),
            s.error_ns.n > 1 ? s.error_ns.stddev() : kNaN,
            100.0 * rel.mean_or_nan(),
            c.pct(c.correct),
            c.pct(c.false_positive),
            c.pct(c.failed),
            c.pct(c.lost),
            k ? k->off_ns.mean_or_nan() : kNaN,
            k ? k->on_ns.mean_or_nan() : kNaN,
            k ? k->difference_ns() : kNaN,
            s.settle_period ? static_cast<double>(*s.settle_period) : kNaN};
}

/// One row per grid point, keyed by the swept values, then a mean over
/// points of every numeric column.
inline std::string render_aggregate(const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    if (points.empty()) return {};
    const auto& labels = points.front().point.labels;
    for (const auto& [axis, v] : labels) os << axis << ',';
    const auto& cols = aggregate_metric_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    std::vector<RunningStats> means(cols.size());
    for (const auto& p : points) {
        for (const auto& [axis, v] : p.point.labels) os << v << ',';
        const auto vals = aggregate_values(p.run.summary);
        for (std::size_t i = 0; i < vals.size(); ++i) {
            os << (i ? "," : "") << format_number(vals[i]);
            if (!std::isnan(vals[i])) means[i].add(vals[i]);
        }
        os << '\n';
    }
    os << "# mean_of_means";
    for (std::size_t i = 1; i < labels.size(); ++i) os << ',';
    for (std::size_t i = 0; i < means.size(); ++i) os << ',' << format_number(means[i].mean_or_nan());
    os << '\n';
    return os.str();
}

} // namespace rfsync
