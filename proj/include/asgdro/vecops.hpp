#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace asgdro::vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline std::vector<double> add(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.begin(), a.end());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return out;
}

inline std::vector<double> scaled(std::span<const double> a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace asgdro::vec
