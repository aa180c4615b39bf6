#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "asgdro/diffcore.hpp"
#include "asgdro/synthdata.hpp"

namespace asgdro::spectra {

using GradientFn = std::function<std::vector<double>(std::span<const double>)>;
using LinearOperator = std::function<std::vector<double>(std::span<const double>)>;

// Finite-difference Hessian-vector product of a gradient field:
// (grad(x + h v/|v|) - grad(x - h v/|v|)) / 2h * |v|.
std::vector<double> hvp(const GradientFn& grad, std::span<const double> x, std::span<const double> v, double h);

// Same for the mean cross-entropy of an MLP on a batch.
std::vector<double> hvp(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                        std::span<const double> v, double h);

// Step used by the MLP analyzer: 1e-4 * (1 + |theta|).
double default_hvp_step(std::span<const double> params);

struct EigenEstimate {
    double value = 0.0;           // Rayleigh quotient, sign included
    std::vector<double> vector;   // unit norm
    std::size_t iterations = 0;
    double residual = 0.0;        // |H v - value v|
    bool converged = false;
};

struct PowerConfig {
    std::size_t k = 2;  // 1 or 2
    double tol = 1e-6;
    std::size_t max_iter = 1000;
    std::uint64_t seed = 0;
};

// Power iteration by |eigenvalue| from a seeded random start; the second
// estimate projects out the first eigenvector at every iterate. Stops when
// successive Rayleigh quotients differ by less than tol * max(1, |value|).
// Non-convergence is reported through EigenEstimate::converged.
std::vector<EigenEstimate> top_eigs(const LinearOperator& op, std::size_t dim, const PowerConfig& cfg);

std::vector<EigenEstimate> top_eigs(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                                    const PowerConfig& cfg);

struct SpectrumEntry {
    double largest = 0.0;
    double second = 0.0;
    std::size_t iterations_largest = 0;
    std::size_t iterations_second = 0;
    double residual_largest = 0.0;
    double residual_second = 0.0;
    bool converged = false;
};

struct SpectrumReport {
    std::vector<std::string> group_names;
    std::vector<SpectrumEntry> per_group;
    SpectrumEntry pooled;

    // Largest top eigenvalue over the groups.
    double worst_group_largest() const;
};

SpectrumEntry to_entry(const std::vector<EigenEstimate>& eigs);

// Unweighted training loss of each group, and of the whole dataset.
SpectrumReport per_group_spectrum(const ModelSpec& spec, const ParamVector& params,
                                  const data::GroupedDataset& dataset, const PowerConfig& cfg);

}  // namespace asgdro::spectra
