#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "asgdro/config.hpp"
#include "asgdro/diffcore.hpp"
#include "asgdro/spectra.hpp"
#include "asgdro/synthdata.hpp"

namespace asgdro::harness {

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double mean_epsilon_norm = 0.0;  // mean ||eps|| over the epoch's steps, 0 without an ascent step
    bool evaluated = false;
    data::GroupAccuracy val;
    std::vector<double> lambdas;  // group weights at the end of the epoch (group algorithms)
};

struct TestMetrics {
    std::string name;
    data::GroupAccuracy accuracy;
};

struct RunRecord {
    std::uint64_t seed = 0;
    Algorithm algorithm = Algorithm::ERM;
    std::vector<EpochMetrics> epochs;
    std::size_t selected_epoch = 0;     // argmax worst-group val accuracy, earliest on ties
    data::GroupAccuracy selected_val;
    std::vector<TestMetrics> tests;     // evaluated with the selected checkpoint
    ModelSpec model;
    ParamVector checkpoint;
    double wall_clock_seconds = 0.0;
    bool failed = false;
    std::string error;

    const TestMetrics* test(const std::string& name) const;
};

// Generated for the run seed, or loaded from cfg.dataset_path.
data::Splits load_or_generate(const ExperimentConfig& cfg, std::uint64_t seed);

// Independent 64-bit stream seed for (seed, purpose).
std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t purpose);

data::GroupAccuracy evaluate(const ModelSpec& spec, const ParamVector& params, const data::GroupedDataset& ds);

// One seed; exceptions are caught and reported through RunRecord::failed.
RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed);
RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const data::Splits& splits);

// Every seed of cfg.seeds; seeds run in parallel, results in seed order.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

struct SweepCell {
    std::map<std::string, double> overrides;
    std::vector<RunRecord> records;
    double score = 0.0;  // mean selected worst-group val accuracy over successful seeds
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::size_t best = 0;  // highest score, first cell on ties
};

// Cartesian product of the grid in key order.
std::vector<std::map<std::string, double>> expand_grid(const std::map<std::string, std::vector<double>>& grid);

SweepResult sweep(const ExperimentConfig& cfg, const std::map<std::string, std::vector<double>>& grid);

double mean_selected_val_worst(const std::vector<RunRecord>& records);

// Files under dir: config.json, metrics.csv, summary.json and
// seed_<n>/checkpoint.json. Wall-clock values only appear in summary.json.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                       const std::vector<RunRecord>& records);
std::string metrics_csv(const std::vector<RunRecord>& records);
nlohmann::json summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& records);

// sweep.csv (one row per cell and seed), sweep.json, and cell_<k>/ run outputs.
void write_sweep_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, const SweepResult& result);

struct Checkpoint {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::size_t selected_epoch = 0;
    ModelSpec model;
    ParamVector params;
    std::string config_fingerprint;
};

nlohmann::json checkpoint_json(const ExperimentConfig& cfg, const RunRecord& record);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json spectrum_json(const spectra::SpectrumReport& report, const std::string& config_fingerprint);

// Per-group spectrum of a checkpoint on its training split.
nlohmann::json emit_spectrum(const std::filesystem::path& checkpoint_path, const data::GroupedDataset* dataset,
                             const std::filesystem::path& out_file);

}  // namespace asgdro::harness
