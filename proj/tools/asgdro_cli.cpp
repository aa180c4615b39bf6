// Command-line driver: data generation, training, sweeps, toy landscapes,
// Hessian spectra and run aggregation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asgdro/config.hpp"
#include "asgdro/errors.hpp"
#include "asgdro/experiment.hpp"
#include "asgdro/figures.hpp"

namespace fs = std::filesystem;
using namespace asgdro;
using namespace asgdro::harness;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Experiment config (dotted key-value text or JSON)");
    cmd->add_option("--seed", f.seed, "Run only this seed");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_flag("--quiet", f.quiet, "Suppress progress output");
}

fs::path output_dir(const CommonFlags& f, const ExperimentConfig* cfg, const std::string& sub) {
    if (!f.out.empty()) return f.out;
    if (cfg && !cfg->out_dir.empty()) return cfg->out_dir;
    const char* root = std::getenv("ASGDRO_OUT");
    return fs::path(root && *root ? root : "runs") / sub;
}

ExperimentConfig resolve_config(const CommonFlags& f, bool required) {
    if (f.config.empty()) {
        if (required) throw ConfigError("--config is required");
        return ExperimentConfig{};
    }
    ExperimentConfig cfg = load_config(f.config);
    if (f.seed) cfg.seeds = {*f.seed};
    return cfg;
}

void print_warnings(const ExperimentConfig& cfg, bool quiet) {
    if (quiet) return;
    for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << '\n';
}

int report_failures(const std::vector<RunRecord>& records, bool quiet) {
    int failed = 0;
    for (const auto& r : records)
        if (r.failed) {
            ++failed;
            if (!quiet) std::cerr << "seed " << r.seed << " failed: " << r.error << '\n';
        }
    return failed == static_cast<int>(records.size()) && failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-robust sharpness-aware optimization toolkit"};
    app.require_subcommand(1);

    CommonFlags gen_f, train_f, sweep_f, land_f, spec_f, report_f;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset and write CSV splits");
    add_common(gen, gen_f);

    auto* train = app.add_subcommand("train", "Train every configured seed and write metrics and checkpoints");
    add_common(train, train_f);

    auto* sweep_cmd = app.add_subcommand("sweep", "Run the configured hyperparameter grid");
    add_common(sweep_cmd, sweep_f);

    auto* land = app.add_subcommand("landscape", "Scan a toy two-group loss landscape");
    add_common(land, land_f);
    std::string scenario = "a2", objective = "asgdro";
    landscape::ScanParams scan;
    bool svg = false;
    land->add_option("--scenario", scenario, "a1 or a2")->check(CLI::IsMember({"a1", "a2"}));
    land->add_option("--objective", objective, "group1, group2, erm, gdro or asgdro");
    land->add_option("--resolution", scan.resolution, "Cells per axis");
    land->add_option("--radii", scan.n_radii, "Radii of the perturbation search");
    land->add_option("--angles", scan.n_angles, "Angles of the perturbation search");
    land->add_flag("--svg", svg, "Also write an SVG heatmap");

    auto* spec_cmd = app.add_subcommand("spectrum", "Top Hessian eigenvalues per group for a checkpoint");
    add_common(spec_cmd, spec_f);
    std::string checkpoint, data_dir;
    spec_cmd->add_option("--checkpoint", checkpoint, "checkpoint.json written by train")->required();
    spec_cmd->add_option("--data", data_dir, "Directory written by gen-data (default: regenerate)");

    auto* report = app.add_subcommand("report", "Aggregate run directories into a summary table");
    add_common(report, report_f);
    std::vector<std::string> run_dirs;
    report->add_option("runs", run_dirs, "Run directories containing summary.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            const ExperimentConfig cfg = resolve_config(gen_f, false);
            const auto seed = gen_f.seed.value_or(cfg.seeds.front());
            const auto splits = load_or_generate(cfg, seed);
            auto shift = cfg.shift;
            shift.seed = seed;
            const fs::path out = output_dir(gen_f, nullptr, "data");
            const char* kind = cfg.dataset == DatasetKind::CmnistProxy ? "cmnist_proxy" : "hcmnist_proxy";
            data::save_splits(splits, shift, kind, out);
            if (!gen_f.quiet) std::cout << "wrote dataset to " << out << '\n';
            return 0;
        }
        if (*train) {
            const ExperimentConfig cfg = resolve_config(train_f, true);
            print_warnings(cfg, train_f.quiet);
            const auto records = run_experiment(cfg);
            const fs::path out = output_dir(train_f, &cfg, "train");
            write_run_outputs(out, cfg, records);
            if (!train_f.quiet) std::cout << summary_json(cfg, records).at("aggregate").dump(2) << "\nwrote " << out << '\n';
            return report_failures(records, train_f.quiet);
        }
        if (*sweep_cmd) {
            const ExperimentConfig cfg = resolve_config(sweep_f, true);
            print_warnings(cfg, sweep_f.quiet);
            if (cfg.sweep.empty()) throw ConfigError("config has no sweep.* entries");
            const auto result = sweep(cfg, cfg.sweep);
            const fs::path out = output_dir(sweep_f, &cfg, "sweep");
            write_sweep_outputs(out, cfg, result);
            if (!sweep_f.quiet) {
                std::cout << "best cell " << result.best << " (score " << result.cells[result.best].score << ")";
                for (const auto& [k, v] : result.cells[result.best].overrides) std::cout << ' ' << k << '=' << v;
                std::cout << "\nwrote " << out << '\n';
            }
            return 0;
        }
        if (*land) {
            const fs::path out = output_dir(land_f, nullptr, "landscape");
            const auto res = emit_landscape(scenario, objective, scan, out, svg);
            if (!land_f.quiet) std::cout << res.summary.dump(2) << '\n';
            return 0;
        }
        if (*spec_cmd) {
            std::optional<data::Splits> splits;
            if (!data_dir.empty()) splits = data::load_splits(data_dir);
            const fs::path out = output_dir(spec_f, nullptr, "spectrum") / "spectrum.json";
            const auto j = emit_spectrum(checkpoint, splits ? &splits->train : nullptr, out);
            if (!spec_f.quiet) std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (*report) {
            std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
            const auto agg = aggregate_reports(dirs);
            const auto md = report_markdown(agg);
            const fs::path out = output_dir(report_f, nullptr, "report");
            fs::create_directories(out);
            std::ofstream(out / "report.json") << agg.dump(2) << '\n';
            std::ofstream(out / "report.md") << md;
            if (!report_f.quiet) std::cout << md;
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
