#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "asgdro/diffcore.hpp"
#include "asgdro/robust_opt.hpp"
#include "asgdro/spectra.hpp"
#include "asgdro/synthdata.hpp"

namespace asgdro::harness {

enum class Algorithm { ERM, SAM, ASAM, GDRO, ASGDRO };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);
// GDRO and ASGDRO consume group labels and reweighted batches.
bool uses_groups(Algorithm a);

enum class DatasetKind { CmnistProxy, HcmnistProxy, File };

struct ExperimentConfig {
    DatasetKind dataset = DatasetKind::HcmnistProxy;
    std::string dataset_path;  // for DatasetKind::File: directory written by gen-data
    data::ShiftSpec shift = data::ShiftSpec::hcmnist_defaults();

    Algorithm algorithm = Algorithm::ERM;
    std::vector<std::size_t> hidden_widths{16};
    Activation activation = Activation::ReLU;
    DroConfig optim;

    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    std::size_t eval_every = 1;
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir;

    // Hyperparameter grid for `sweep`; keys are optim.* names.
    std::map<std::string, std::vector<double>> sweep;

    spectra::PowerConfig spectrum{2, 1e-6, 1000, 0};

    // Throws ConfigError on invalid values.
    void validate() const;
    // Settings that are accepted but ignored by the chosen algorithm.
    std::vector<std::string> warnings() const;

    ModelSpec model_for(std::size_t input_dim, std::size_t classes) const;
};

// Dotted-key text: `section.key = value`, `#` comments, comma lists.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Reads either form; JSON when the first non-blank character is '{'.
ExperimentConfig load_config(const std::filesystem::path& path);

// Sorted keys, integers verbatim, floating point with 17 significant digits.
std::string canonical_json(const nlohmann::json& j);
// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string fingerprint(const ExperimentConfig& cfg);

// Applies one optim.* override (as used by sweep cells).
void apply_override(ExperimentConfig& cfg, const std::string& key, double value);

std::string format_double(double v);

}  // namespace asgdro::harness
