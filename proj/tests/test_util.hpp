#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "asgdro/diffcore.hpp"

namespace testutil {

inline asgdro::Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes, std::mt19937_64& rng,
                                  bool weighted = false) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> cls(0, classes - 1);
    std::uniform_real_distribution<double> w(0.2, 2.0);
    asgdro::Batch b;
    b.inputs = asgdro::Matrix(n, dim);
    for (double& v : b.inputs.data) v = normal(rng);
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(cls(rng));
    if (weighted)
        for (std::size_t i = 0; i < n; ++i) b.sample_weights.push_back(w(rng));
    return b;
}

inline asgdro::ParamVector random_params(const asgdro::ModelSpec& spec, std::mt19937_64& rng, double scale = 0.7) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> v(asgdro::param_count(spec));
    for (double& x : v) x = normal(rng);
    return asgdro::ParamVector::from_values(spec, std::move(v));
}

// Straight-line MLP in long double. Layer l stores a fan_out x fan_in
// row-major weight block followed by fan_out biases, layers back to back.
inline long double activate(asgdro::Activation a, long double z) {
    switch (a) {
        case asgdro::Activation::ReLU: return z > 0 ? z : 0;
        case asgdro::Activation::Tanh: return std::tanh(z);
        case asgdro::Activation::Identity: return z;
    }
    return z;
}

inline std::vector<long double> naive_logits(const asgdro::ModelSpec& spec, const std::vector<double>& theta,
                                             const std::vector<double>& x) {
    std::vector<long double> h(x.begin(), x.end());
    std::size_t off = 0;
    const auto& w = spec.layer_widths;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        const std::size_t in = w[l], out = w[l + 1];
        std::vector<long double> z(out);
        for (std::size_t o = 0; o < out; ++o) {
            long double s = theta[off + in * out + o];
            for (std::size_t i = 0; i < in; ++i) s += static_cast<long double>(theta[off + o * in + i]) * h[i];
            z[o] = s;
        }
        off += in * out + out;
        const bool last = l + 2 == w.size();
        if (!last)
            for (auto& v : z) v = activate(spec.activation, v);
        h = std::move(z);
    }
    return h;
}

inline long double naive_loss(const asgdro::ModelSpec& spec, const std::vector<double>& theta,
                              const asgdro::Batch& b) {
    long double num = 0, den = 0;
    for (std::size_t r = 0; r < b.size(); ++r) {
        const auto row = b.inputs.row(r);
        const auto z = naive_logits(spec, theta, std::vector<double>(row.begin(), row.end()));
        long double m = z[0];
        for (auto v : z) m = std::max(m, v);
        long double s = 0;
        for (auto v : z) s += std::exp(v - m);
        const long double ce = m + std::log(s) - z[b.labels[r]];
        num += b.weight(r) * ce;
        den += b.weight(r);
    }
    return num / den;
}

}  // namespace testutil
