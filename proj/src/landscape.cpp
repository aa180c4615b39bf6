#include "asgdro/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace asgdro::landscape {

namespace {

ArgMin reduce_argmin(const GridScan& scan) {
    ArgMin best;
    best.value = scan.values.front();
    for (std::size_t k = 1; k < scan.values.size(); ++k) {
        if (scan.values[k] < best.value) {
            best.value = scan.values[k];
            best.index = k;
        }
    }
    const Vec2 c = scan.cell_center(best.index);
    best.theta1 = c[0];
    best.theta2 = c[1];
    return best;
}

void check_scan_args(const Bounds& b, std::size_t resolution) {
    if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
    if (!(b.theta1_min < b.theta1_max) || !(b.theta2_min < b.theta2_max))
        throw std::invalid_argument("grid bounds must be ordered");
}

}  // namespace

void GaussianSurface::validate() const {
    if (sigma[0][1] != sigma[1][0]) throw std::invalid_argument("covariance must be symmetric");
    if (!(sigma[0][0] > 0.0) || !(sigma[1][1] > 0.0)) throw std::invalid_argument("covariance diagonal must be positive");
    if (!(determinant() > 0.0)) throw std::invalid_argument("covariance must be positive definite");
}

double GaussianSurface::peak() const { return 1.0 / (2.0 * std::numbers::pi * std::sqrt(determinant())); }

ToyScenario scenario_a1() {
    ToyScenario sc;
    sc.surfaces.push_back({{-2.0, 0.0}, {{{1.5, 0.0}, {0.0, 2.0}}}});
    sc.surfaces.push_back({{2.0, 0.0}, {{{1.5, 0.0}, {0.0, 0.05}}}});
    sc.rho = 0.6;
    return sc;
}

ToyScenario scenario_a2() {
    ToyScenario sc;
    sc.surfaces.push_back({{-2.0, 0.0}, {{{1.5, 0.0}, {0.0, 2.0}}}});
    sc.surfaces.push_back({{2.0, 0.0}, {{{1.5, 0.0}, {0.0, 2.0}}}});
    sc.rho = 0.6;
    return sc;
}

ToyScenario scenario_by_id(const std::string& id) {
    if (id == "a1") return scenario_a1();
    if (id == "a2") return scenario_a2();
    throw std::invalid_argument("unknown scenario '" + id + "' (expected a1 or a2)");
}

double surface_density(const GaussianSurface& s, const Vec2& theta) {
    const double det = s.determinant();
    const double d0 = theta[0] - s.mu[0];
    const double d1 = theta[1] - s.mu[1];
    // inverse of a 2x2 symmetric matrix
    const double i00 = s.sigma[1][1] / det;
    const double i11 = s.sigma[0][0] / det;
    const double i01 = -s.sigma[0][1] / det;
    const double q = d0 * (i00 * d0 + i01 * d1) + d1 * (i01 * d0 + i11 * d1);
    return s.peak() * std::exp(-0.5 * q);
}

double group_loss(const GaussianSurface& s, const Vec2& theta) { return s.peak() - surface_density(s, theta); }

double erm_objective(const ToyScenario& sc, const Vec2& theta) {
    double sum = 0.0;
    for (const auto& s : sc.surfaces) sum += group_loss(s, theta);
    return sum / static_cast<double>(sc.surfaces.size());
}

double gdro_objective(const ToyScenario& sc, const Vec2& theta) {
    double worst = -INFINITY;
    for (const auto& s : sc.surfaces) worst = std::max(worst, group_loss(s, theta));
    return worst;
}

AsgdroEval asgdro_eval(const ToyScenario& sc, const Vec2& theta, std::size_t n_angles, std::size_t n_radii) {
    if (n_angles < 16 || n_radii < 4) throw std::invalid_argument("need n_angles >= 16 and n_radii >= 4");
    Vec2 best_eps{0.0, 0.0};
    double best = -INFINITY;
    for (std::size_t k = 1; k <= n_radii; ++k) {
        const double r = sc.rho * static_cast<double>(k) / static_cast<double>(n_radii);
        for (std::size_t a = 0; a < n_angles; ++a) {
            const double phi = 2.0 * std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles);
            const Vec2 eps{r * std::cos(phi), r * std::sin(phi)};
            const double v = erm_objective(sc, {theta[0] + eps[0], theta[1] + eps[1]});
            if (v > best) {
                best = v;
                best_eps = eps;
            }
        }
    }
    return {gdro_objective(sc, {theta[0] + best_eps[0], theta[1] + best_eps[1]}), best_eps};
}

double asgdro_objective(const ToyScenario& sc, const Vec2& theta, std::size_t n_angles, std::size_t n_radii) {
    return asgdro_eval(sc, theta, n_angles, n_radii).value;
}

Vec2 GridScan::cell_center(std::size_t index) const {
    const std::size_t i = index % resolution;
    const std::size_t j = index / resolution;
    const double w1 = (bounds.theta1_max - bounds.theta1_min) / static_cast<double>(resolution);
    const double w2 = (bounds.theta2_max - bounds.theta2_min) / static_cast<double>(resolution);
    return {bounds.theta1_min + (static_cast<double>(i) + 0.5) * w1,
            bounds.theta2_min + (static_cast<double>(j) + 0.5) * w2};
}

bool GridScan::argmin_on_border() const {
    const std::size_t i = argmin.index % resolution;
    const std::size_t j = argmin.index / resolution;
    return i == 0 || j == 0 || i + 1 == resolution || j + 1 == resolution;
}

GridScan grid_scan(const Objective& objective, const Bounds& bounds, std::size_t resolution) {
    check_scan_args(bounds, resolution);
    GridScan scan;
    scan.bounds = bounds;
    scan.resolution = resolution;
    const std::size_t cells = resolution * resolution;
    scan.values.resize(cells);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(cells); ++k)
        scan.values[static_cast<std::size_t>(k)] = objective(scan.cell_center(static_cast<std::size_t>(k)));
    scan.argmin = reduce_argmin(scan);
    return scan;
}

namespace serial {

GridScan grid_scan(const Objective& objective, const Bounds& bounds, std::size_t resolution) {
    check_scan_args(bounds, resolution);
    GridScan scan;
    scan.bounds = bounds;
    scan.resolution = resolution;
    scan.values.resize(resolution * resolution);
    for (std::size_t k = 0; k < scan.values.size(); ++k) scan.values[k] = objective(scan.cell_center(k));
    scan.argmin = reduce_argmin(scan);
    return scan;
}

}  // namespace serial

Objective objective_by_id(const ToyScenario& sc, const std::string& id, const ScanParams& params) {
    if (id == "erm") return [sc](const Vec2& t) { return erm_objective(sc, t); };
    if (id == "gdro") return [sc](const Vec2& t) { return gdro_objective(sc, t); };
    if (id == "asgdro") {
        const auto angles = params.n_angles;
        const auto radii = params.n_radii;
        return [sc, angles, radii](const Vec2& t) { return asgdro_objective(sc, t, angles, radii); };
    }
    if (id.rfind("group", 0) == 0) {
        std::size_t k = 0;
        try {
            k = std::stoul(id.substr(5));
        } catch (const std::exception&) {
            throw std::invalid_argument("unknown objective '" + id + "'");
        }
        if (k == 0 || k > sc.surfaces.size()) throw std::invalid_argument("group index out of range in '" + id + "'");
        const GaussianSurface s = sc.surfaces[k - 1];
        return [s](const Vec2& t) { return group_loss(s, t); };
    }
    throw std::invalid_argument("unknown objective '" + id + "'");
}

}  // namespace asgdro::landscape
