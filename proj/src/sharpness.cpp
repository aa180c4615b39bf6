#include "asgdro/sharpness.hpp"

#include <cmath>
#include <stdexcept>

#include "asgdro/errors.hpp"
#include "asgdro/vecops.hpp"

namespace asgdro {

std::string to_string(Normalizer n) { return n == Normalizer::None ? "none" : "elementwise"; }

Normalizer normalizer_from_string(const std::string& name) {
    if (name == "none" || name == "sam") return Normalizer::None;
    if (name == "elementwise" || name == "asam") return Normalizer::Elementwise;
    throw std::invalid_argument("unknown normalizer '" + name + "'");
}

void PerturbConfig::validate() const {
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    if (!(xi >= 0.0)) throw std::invalid_argument("xi must be nonnegative");
}

Perturbation sam_perturbation(std::span<const double> grad, const PerturbConfig& cfg) {
    cfg.validate();
    const double norm = vec::norm2(grad);
    if (norm < kZeroGradientThreshold) throw ZeroGradient("gradient norm below threshold");
    Perturbation p;
    p.epsilon = vec::scaled(grad, cfg.rho / norm);
    p.ascent_norm = vec::norm2(p.epsilon);
    return p;
}

Perturbation asam_perturbation(std::span<const double> params, std::span<const double> grad,
                               const PerturbConfig& cfg) {
    cfg.validate();
    if (params.size() != grad.size()) throw ShapeError("params and gradient differ in length");
    const std::size_t n = grad.size();
    std::vector<double> tg(n);
    for (std::size_t i = 0; i < n; ++i) tg[i] = (std::abs(params[i]) + cfg.xi) * grad[i];
    const double norm = vec::norm2(tg);
    if (norm < kZeroGradientThreshold) throw ZeroGradient("normalized gradient norm below threshold");

    Perturbation p;
    p.epsilon.resize(n);
    const double s = cfg.rho / norm;
    double inv_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::abs(params[i]) + cfg.xi;
        p.epsilon[i] = s * t * tg[i];
        // T^-1 eps, evaluated as s * T g to stay exact where t is tiny
        const double u = s * tg[i];
        inv_sq += u * u;
    }
    p.ascent_norm = std::sqrt(inv_sq);
    return p;
}

Perturbation perturbation(std::span<const double> params, std::span<const double> grad,
                          const PerturbConfig& cfg) {
    return cfg.normalizer == Normalizer::None ? sam_perturbation(grad, cfg)
                                              : asam_perturbation(params, grad, cfg);
}

}  // namespace asgdro
