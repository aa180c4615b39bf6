#include "asgdro/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "asgdro/errors.hpp"
#include "asgdro/vecops.hpp"

namespace asgdro::spectra {

namespace {

void project_out(std::vector<double>& w, std::span<const double> u) {
    const double c = vec::dot(w, u);
    vec::axpy(-c, u, w);
}

EigenEstimate power_iterate(const LinearOperator& op, std::size_t dim, const PowerConfig& cfg,
                            const std::vector<double>* deflate, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = normal(rng);
    if (deflate) project_out(v, *deflate);
    double n = vec::norm2(v);
    if (n == 0.0) throw std::runtime_error("degenerate power-iteration start");
    for (double& x : v) x /= n;

    EigenEstimate est;
    double previous = 0.0;
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        std::vector<double> w = op(v);
        if (w.size() != dim) throw ShapeError("operator changed the vector length");
        if (!vec::all_finite(w)) throw NonFiniteError("non-finite Hessian-vector product");
        if (deflate) project_out(w, *deflate);
        const double rq = vec::dot(v, w);

        std::vector<double> r = w;
        vec::axpy(-rq, v, r);
        est.value = rq;
        est.vector = v;
        est.iterations = it;
        est.residual = vec::norm2(r);

        n = vec::norm2(w);
        if (n == 0.0) {
            est.converged = true;
            break;
        }
        if (it > 1 && std::abs(rq - previous) < cfg.tol * std::max(1.0, std::abs(rq))) {
            est.converged = true;
            break;
        }
        previous = rq;
        for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / n;
        if (deflate) {
            project_out(v, *deflate);
            const double m = vec::norm2(v);
            if (m == 0.0) {
                est.converged = true;
                break;
            }
            for (double& x : v) x /= m;
        }
    }
    return est;
}

}  // namespace

std::vector<double> hvp(const GradientFn& grad, std::span<const double> x, std::span<const double> v, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("hvp step must be positive");
    const double vn = vec::norm2(v);
    if (!(vn > 0.0)) throw std::invalid_argument("hvp direction must be nonzero");
    std::vector<double> up(x.begin(), x.end());
    std::vector<double> down(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = h * v[i] / vn;
        up[i] += d;
        down[i] -= d;
    }
    const auto gu = grad(up);
    const auto gd = grad(down);
    std::vector<double> out(x.size());
    const double s = vn / (2.0 * h);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gu[i] - gd[i]) * s;
    if (!vec::all_finite(out)) throw NonFiniteError("non-finite Hessian-vector product");
    return out;
}

std::vector<double> hvp(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                        std::span<const double> v, double h) {
    ParamVector probe = params;
    return hvp(
        [&](std::span<const double> x) {
            std::copy(x.begin(), x.end(), probe.values.begin());
            return loss_and_grad(spec, probe, batch).grad;
        },
        params.values, v, h);
}

double default_hvp_step(std::span<const double> params) { return 1e-4 * (1.0 + vec::norm2(params)); }

std::vector<EigenEstimate> top_eigs(const LinearOperator& op, std::size_t dim, const PowerConfig& cfg) {
    if (cfg.k != 1 && cfg.k != 2) throw std::invalid_argument("top_eigs supports k = 1 or 2");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (dim == 0) throw std::invalid_argument("empty operator");
    std::mt19937_64 rng(cfg.seed);
    std::vector<EigenEstimate> out;
    out.push_back(power_iterate(op, dim, cfg, nullptr, rng));
    if (cfg.k == 2) {
        if (dim == 1) {
            out.push_back(EigenEstimate{0.0, {0.0}, 0, 0.0, true});
        } else {
            const std::vector<double> first = out.front().vector;
            out.push_back(power_iterate(op, dim, cfg, &first, rng));
        }
    }
    return out;
}

std::vector<EigenEstimate> top_eigs(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                                    const PowerConfig& cfg) {
    const double h = default_hvp_step(params.values);
    return top_eigs([&](std::span<const double> v) { return hvp(spec, params, batch, v, h); }, params.size(), cfg);
}

SpectrumEntry to_entry(const std::vector<EigenEstimate>& eigs) {
    SpectrumEntry e;
    e.largest = eigs.at(0).value;
    e.iterations_largest = eigs[0].iterations;
    e.residual_largest = eigs[0].residual;
    e.converged = eigs[0].converged;
    if (eigs.size() > 1) {
        e.second = eigs[1].value;
        e.iterations_second = eigs[1].iterations;
        e.residual_second = eigs[1].residual;
        e.converged = e.converged && eigs[1].converged;
    }
    return e;
}

double SpectrumReport::worst_group_largest() const {
    double worst = -INFINITY;
    for (const auto& e : per_group) worst = std::max(worst, e.largest);
    return worst;
}

SpectrumReport per_group_spectrum(const ModelSpec& spec, const ParamVector& params,
                                  const data::GroupedDataset& dataset, const PowerConfig& cfg) {
    dataset.require_all_groups();
    SpectrumReport report;
    report.group_names = dataset.group_names;
    for (std::size_t g = 0; g < dataset.num_groups(); ++g)
        report.per_group.push_back(to_entry(top_eigs(spec, params, dataset.group_batch(g), cfg)));
    report.pooled = to_entry(top_eigs(spec, params, dataset.as_batch(), cfg));
    return report;
}

}  // namespace asgdro::spectra
