// rfsync: run, sweep and validate delay-compensation scenarios.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rfsync/rfsync.hpp"

namespace fs = std::filesystem;
using namespace rfsync;

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2 };

struct Source {
    std::string preset;
    std::string scenario_path;
    std::optional<std::uint64_t> seed;

    void add_options(CLI::App& cmd) {
        auto* p = cmd.add_option("--preset", preset, "Built-in experiment preset");
        auto* s = cmd.add_option("--scenario", scenario_path, "Scenario file (TOML)");
        p->excludes(s);
        s->excludes(p);
        cmd.add_option("--seed", seed, "Override the root seed");
    }

    LoadedScenario load() const {
        if (preset.empty() == scenario_path.empty())
            throw ValidationError({"give exactly one of --preset or --scenario"});
        LoadedScenario l;
        if (!preset.empty()) {
            l.scenario = experiment_preset(preset);
            l.source = "preset " + preset;
        } else {
            l = load_scenario_file(scenario_path);
        }
        if (seed) l.scenario.seed = *seed;
        return l;
    }
};

/// Validate and report every problem with its location; false if invalid.
bool check(const LoadedScenario& l) {
    const auto problems = l.scenario.violations();
    for (const auto& p : problems) std::cerr << "error: " << l.locate(p) << '\n';
    return problems.empty();
}

std::optional<std::string> default_output_dir() {
    if (const char* d = std::getenv("RFSYNC_OUTPUT_DIR"); d && *d) return std::string(d);
    return std::nullopt;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

OutputFormat parse_format(const std::string& f) { return f == "jsonl" ? OutputFormat::Jsonl : OutputFormat::Csv; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reverse-flooding propagation delay compensation simulator"};
    app.require_subcommand(1);

    Source run_src;
    std::string run_out, run_format = "csv";
    bool run_compare = false;
    auto* run = app.add_subcommand("run", "Run one scenario and write metrics rows plus a summary");
    run_src.add_options(*run);
    run->add_option("-o,--output", run_out, "Output file (default: stdout, or $RFSYNC_OUTPUT_DIR/<name>)");
    run->add_option("--format", run_format, "Row format")->check(CLI::IsMember({"csv", "jsonl"}));
    run->add_flag("--compare-compensation", run_compare, "Also run with compensation off (same seed)");

    Source sweep_src;
    std::string sweep_dir, sweep_format = "csv";
    std::size_t jobs = 1, seeds = 0;
    auto* sweep = app.add_subcommand("sweep", "Run every point of the scenario's sweep grid");
    sweep_src.add_options(*sweep);
    sweep->add_option("-d,--output-dir", sweep_dir, "Directory for per-point files and aggregate.csv");
    sweep->add_option("--format", sweep_format, "Row format")->check(CLI::IsMember({"csv", "jsonl"}));
    sweep->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::Range(1, 256));
    sweep->add_option("--seeds", seeds, "Replace the grid by N consecutive seeds starting at the root seed");

    std::string dump;
    auto* presets = app.add_subcommand("presets", "List built-in presets");
    presets->add_option("--dump", dump, "Print the named preset as a scenario file");

    Source validate_src;
    auto* validate = app.add_subcommand("validate", "Check a scenario and report every problem");
    validate_src.add_options(*validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*presets) {
            if (dump.empty()) {
                for (const auto& [name, what] : preset_catalog()) std::cout << name << "\t" << what << '\n';
            } else {
                std::cout << dump_scenario(experiment_preset(dump));
            }
            return kOk;
        }

        if (*validate) {
            const auto l = validate_src.load();
            if (!check(l)) return kValidation;
            for (const auto& g : expand_grid(l.scenario)) g.scenario.validate();
            std::cout << l.source << ": ok\n";
            return kOk;
        }

        if (*run) {
            auto l = run_src.load();
            if (run_compare) l.scenario.compare_compensation = true;
            if (!check(l)) return kValidation;
            const auto fmt = parse_format(run_format);
            const auto r = render_run(l.scenario, fmt);
            std::string out = run_out;
            if (out.empty())
                if (auto dir = default_output_dir())
                    out = (fs::path(*dir) / (l.scenario.name + file_extension(fmt))).string();
            if (out.empty()) {
                std::cout << r.text;
            } else {
                write_file(out, r.text);
                write_summary_text(std::cout, r.summary);
                std::cerr << "wrote " << out << '\n';
            }
            return kOk;
        }

        if (*sweep) {
            auto l = sweep_src.load();
            if (seeds > 0) {
                SweepAxis axis{"seed", {}};
                for (std::size_t k = 0; k < seeds; ++k) axis.values.push_back(std::to_string(l.scenario.seed + k));
                l.scenario.sweep = {axis};
            }
            if (!check(l)) return kValidation;
            const auto fmt = parse_format(sweep_format);
            const auto points = run_sweep(l.scenario, fmt, jobs);
            fs::path dir = sweep_dir;
            if (dir.empty()) dir = fs::path(default_output_dir().value_or(".")) / ("sweep_" + l.scenario.name);
            for (const auto& p : points) write_file(dir / (p.point.tag() + file_extension(fmt)), p.run.text);
            const auto table = render_aggregate(points);
            write_file(dir / "aggregate.csv", table);
            std::cout << table;
            std::cerr << "wrote " << points.size() << " runs to " << dir.string() << '\n';
            return kOk;
        }
    } catch (const ScenarioFileError& e) {
        for (const auto& p : e.problems()) std::cerr << "error: " << p << '\n';
        return kValidation;
    } catch (const ValidationError& e) {
        for (const auto& p : e.problems()) std::cerr << "error: " << p << '\n';
        return kValidation;
    } catch (const UnitError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kOk;
}
