#include "asgdro/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "asgdro/config.hpp"

namespace asgdro::harness {

namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string ramp(double t) {
    // dark blue (20, 30, 90) -> yellow (250, 230, 40)
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(20 + t * 230));
    const int g = static_cast<int>(std::lround(30 + t * 200));
    const int b = static_cast<int>(std::lround(90 - t * 50));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string grid_csv(const landscape::GridScan& scan) {
    std::string out = "theta1,theta2,value\n";
    for (std::size_t k = 0; k < scan.values.size(); ++k) {
        const auto c = scan.cell_center(k);
        out += format_double(c[0]) + ',' + format_double(c[1]) + ',' + format_double(scan.values[k]) + '\n';
    }
    return out;
}

std::string heatmap_svg(const landscape::GridScan& scan, const std::string& title, double rho) {
    const double size = 600.0;
    const double margin = 40.0;
    const double cell = size / static_cast<double>(scan.resolution);
    const auto [lo, hi] = std::minmax_element(scan.values.begin(), scan.values.end());
    const double span = *hi - *lo > 0.0 ? *hi - *lo : 1.0;
    const auto& b = scan.bounds;
    auto px = [&](double t1) { return margin + (t1 - b.theta1_min) / (b.theta1_max - b.theta1_min) * size; };
    auto py = [&](double t2) { return margin + (b.theta2_max - t2) / (b.theta2_max - b.theta2_min) * size; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\""
        << size + 2 * margin << "\" shape-rendering=\"crispEdges\">\n";
    svg << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title
        << " (min " << fmt(*lo) << ", max " << fmt(*hi) << ")</text>\n";
    for (std::size_t k = 0; k < scan.values.size(); ++k) {
        const std::size_t i = k % scan.resolution;
        const std::size_t j = k / scan.resolution;
        const double x = margin + static_cast<double>(i) * cell;
        const double y = margin + size - static_cast<double>(j + 1) * cell;
        svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(cell + 0.05) << "\" height=\""
            << fmt(cell + 0.05) << "\" fill=\"" << ramp((scan.values[k] - *lo) / span) << "\"/>\n";
    }
    const double ax = px(scan.argmin.theta1);
    const double ay = py(scan.argmin.theta2);
    svg << "<path d=\"M" << fmt(ax - 8) << ' ' << fmt(ay - 8) << " L" << fmt(ax + 8) << ' ' << fmt(ay + 8) << " M"
        << fmt(ax - 8) << ' ' << fmt(ay + 8) << " L" << fmt(ax + 8) << ' ' << fmt(ay - 8)
        << "\" stroke=\"red\" stroke-width=\"2\"/>\n";
    if (rho > 0.0) {
        const double r = rho / (b.theta1_max - b.theta1_min) * size;
        svg << "<circle cx=\"" << fmt(ax) << "\" cy=\"" << fmt(ay) << "\" r=\"" << fmt(r)
            << "\" fill=\"none\" stroke=\"red\" stroke-width=\"1.5\"/>\n";
    }
    svg << "<text x=\"" << margin << "\" y=\"" << size + margin + 24 << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << "theta1 in [" << fmt(b.theta1_min) << ", " << fmt(b.theta1_max) << "], theta2 in [" << fmt(b.theta2_min)
        << ", " << fmt(b.theta2_max) << "]</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

LandscapeOutputs emit_landscape(const std::string& scenario_id, const std::string& objective_id,
                                const landscape::ScanParams& params, const std::filesystem::path& out_dir,
                                bool write_svg) {
    const auto scenario = landscape::scenario_by_id(scenario_id);
    const auto objective = landscape::objective_by_id(scenario, objective_id, params);
    LandscapeOutputs out;
    out.scan = landscape::grid_scan(objective, params.bounds, params.resolution);
    const auto& a = out.scan.argmin;
    out.summary = {{"scenario", scenario_id},
                   {"objective", objective_id},
                   {"rho", scenario.rho},
                   {"bounds",
                    {params.bounds.theta1_min, params.bounds.theta1_max, params.bounds.theta2_min,
                     params.bounds.theta2_max}},
                   {"resolution", params.resolution},
                   {"n_radii", params.n_radii},
                   {"n_angles", params.n_angles},
                   {"argmin", {{"theta1", a.theta1}, {"theta2", a.theta2}, {"value", a.value}, {"index", a.index}}},
                   {"argmin_on_border", out.scan.argmin_on_border()}};

    std::filesystem::create_directories(out_dir);
    const std::string stem = "landscape_" + scenario_id + "_" + objective_id;
    write_text(out_dir / (stem + ".csv"), grid_csv(out.scan));
    write_text(out_dir / (stem + ".json"), out.summary.dump(2) + "\n");
    if (write_svg) {
        const double rho = objective_id == "asgdro" ? scenario.rho : 0.0;
        write_text(out_dir / (stem + ".svg"), heatmap_svg(out.scan, stem, rho));
    }
    return out;
}

json aggregate_reports(const std::vector<std::filesystem::path>& run_dirs) {
    json rows = json::array();
    for (const auto& dir : run_dirs) {
        std::ifstream in(dir / "summary.json");
        if (!in) throw std::runtime_error("missing " + (dir / "summary.json").string());
        const json s = json::parse(in);
        json row{{"run", dir.filename().string()}, {"algorithm", s.at("algorithm")},
                 {"mean_selected_val_worst", s.at("mean_selected_val_worst")}, {"tests", s.at("aggregate")}};
        std::size_t failed = 0;
        for (const auto& r : s.at("runs"))
            if (r.at("failed").get<bool>()) ++failed;
        row["failed_seeds"] = failed;
        rows.push_back(row);
    }
    return {{"rows", rows}};
}

std::string report_markdown(const json& aggregate) {
    std::vector<std::string> tests;
    for (const auto& row : aggregate.at("rows"))
        for (auto it = row.at("tests").begin(); it != row.at("tests").end(); ++it)
            if (std::find(tests.begin(), tests.end(), it.key()) == tests.end()) tests.push_back(it.key());
    std::ostringstream md;
    md << "| run | algorithm |";
    for (const auto& t : tests) md << ' ' << t << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < tests.size(); ++i) md << "---|";
    md << '\n';
    char buf[64];
    for (const auto& row : aggregate.at("rows")) {
        md << "| " << row.at("run").get<std::string>() << " | " << row.at("algorithm").get<std::string>() << " |";
        for (const auto& t : tests) {
            if (row.at("tests").contains(t)) {
                const auto& a = row.at("tests").at(t);
                std::snprintf(buf, sizeof buf, " %.2f ± %.2f (median %.2f) |", 100.0 * a.at("mean_average").get<double>(),
                              100.0 * a.at("std_average").get<double>(), 100.0 * a.at("median_average").get<double>());
                md << buf;
            } else {
                md << " - |";
            }
        }
        md << '\n';
    }
    return md.str();
}

}  // namespace asgdro::harness
