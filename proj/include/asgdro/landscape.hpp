#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace asgdro::landscape {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

// One group's loss surface: an inverted bivariate Gaussian density.
struct GaussianSurface {
    Vec2 mu{0.0, 0.0};
    Mat2 sigma{{{1.0, 0.0}, {0.0, 1.0}}};

    void validate() const;
    double determinant() const { return sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0]; }
    // Density at the mode, 1 / (2 pi sqrt|Sigma|).
    double peak() const;
};

struct ToyScenario {
    std::vector<GaussianSurface> surfaces;
    double rho = 0.6;
};

// Two groups; group 2 sharp along theta2 (a-1) or as flat as group 1 (a-2).
ToyScenario scenario_a1();
ToyScenario scenario_a2();
ToyScenario scenario_by_id(const std::string& id);

double surface_density(const GaussianSurface& s, const Vec2& theta);
// peak - density; zero exactly at mu.
double group_loss(const GaussianSurface& s, const Vec2& theta);

double erm_objective(const ToyScenario& sc, const Vec2& theta);
double gdro_objective(const ToyScenario& sc, const Vec2& theta);

// Brute-force argmax of the ERM objective over the closed rho-ball on a polar
// grid (radii rho*k/n_radii, k = 1..n_radii; n_angles directions), then the
// GDRO objective at theta + eps*.
struct AsgdroEval {
    double value = 0.0;
    Vec2 epsilon{0.0, 0.0};
};
AsgdroEval asgdro_eval(const ToyScenario& sc, const Vec2& theta, std::size_t n_angles, std::size_t n_radii);
double asgdro_objective(const ToyScenario& sc, const Vec2& theta, std::size_t n_angles, std::size_t n_radii);

struct Bounds {
    double theta1_min = -5.0, theta1_max = 5.0;
    double theta2_min = -5.0, theta2_max = 5.0;
};

struct ArgMin {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double value = 0.0;
    std::size_t index = 0;
};

// values[j * resolution + i] holds the objective at the center of cell
// (i along theta1, j along theta2).
struct GridScan {
    Bounds bounds;
    std::size_t resolution = 0;
    std::vector<double> values;
    ArgMin argmin;

    Vec2 cell_center(std::size_t index) const;
    // True when the argmin cell touches the scan border.
    bool argmin_on_border() const;
};

using Objective = std::function<double(const Vec2&)>;

// Cells evaluated in parallel into disjoint slots; argmin reduced serially
// with the lowest index winning ties.
GridScan grid_scan(const Objective& objective, const Bounds& bounds, std::size_t resolution);

namespace serial {
GridScan grid_scan(const Objective& objective, const Bounds& bounds, std::size_t resolution);
}

struct ScanParams {
    Bounds bounds;
    std::size_t resolution = 201;
    std::size_t n_radii = 16;
    std::size_t n_angles = 64;
};

// Objective ids: group1, group2 (any group<k>), erm, gdro, asgdro.
Objective objective_by_id(const ToyScenario& sc, const std::string& id, const ScanParams& params);

}  // namespace asgdro::landscape
