#pragma once

#include <span>
#include <string>
#include <vector>

namespace asgdro {

enum class Normalizer {
    None,        // SAM: plain L2 ball
    Elementwise  // ASAM: T = diag(|theta_i| + xi)
};

std::string to_string(Normalizer n);
Normalizer normalizer_from_string(const std::string& name);

struct PerturbConfig {
    double rho = 0.05;
    Normalizer normalizer = Normalizer::None;
    double xi = 0.01;

    void validate() const;
};

struct Perturbation {
    std::vector<double> epsilon;
    // ||eps|| for SAM, ||T^-1 eps|| for ASAM; equals rho up to rounding.
    double ascent_norm = 0.0;
};

// Gradient norms below this carry no ascent direction.
inline constexpr double kZeroGradientThreshold = 1e-12;

// eps = rho * g / ||g||. Throws ZeroGradient when ||g|| < 1e-12.
Perturbation sam_perturbation(std::span<const double> grad, const PerturbConfig& cfg);

// eps = rho * T^2 g / ||T g|| with T = diag(|theta_i| + xi). Throws
// ZeroGradient when ||T g|| < 1e-12.
Perturbation asam_perturbation(std::span<const double> params, std::span<const double> grad,
                               const PerturbConfig& cfg);

// Dispatches on cfg.normalizer.
Perturbation perturbation(std::span<const double> params, std::span<const double> grad,
                          const PerturbConfig& cfg);

}  // namespace asgdro
