#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "asgdro/landscape.hpp"

namespace asgdro::harness {

// `theta1,theta2,value` in row-major order (theta1 fastest).
std::string grid_csv(const landscape::GridScan& scan);

// Standalone SVG: one rect per cell on a linear dark-blue-to-yellow ramp,
// argmin marked with a cross and, when rho > 0, the rho-ball around it.
std::string heatmap_svg(const landscape::GridScan& scan, const std::string& title, double rho);

struct LandscapeOutputs {
    landscape::GridScan scan;
    nlohmann::json summary;
};

// Writes landscape_<scenario>_<objective>.csv / .json (and .svg when asked).
LandscapeOutputs emit_landscape(const std::string& scenario_id, const std::string& objective_id,
                                const landscape::ScanParams& params, const std::filesystem::path& out_dir,
                                bool write_svg);

// Aggregate over the summary.json files of several run directories: one row
// per run, one column per test split.
nlohmann::json aggregate_reports(const std::vector<std::filesystem::path>& run_dirs);
std::string report_markdown(const nlohmann::json& aggregate);

}  // namespace asgdro::harness
