#include "asgdro/robust_opt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asgdro/errors.hpp"
#include "asgdro/vecops.hpp"

namespace asgdro {

namespace {

void clip_in_place(std::vector<double>& g, double clip_norm) {
    if (clip_norm <= 0.0) return;
    const double n = vec::norm2(g);
    if (n > clip_norm) {
        const double s = clip_norm / n;
        for (double& v : g) v *= s;
    }
}

ParamVector descend(const ParamVector& params, const std::vector<double>& direction, const DroConfig& cfg) {
    ParamVector next = params;
    for (std::size_t i = 0; i < next.values.size(); ++i) {
        double d = direction[i];
        if (cfg.weight_decay > 0.0) d += cfg.weight_decay * params.values[i];
        next.values[i] -= cfg.eta * d;
    }
    if (!vec::all_finite(next.values)) throw NonFiniteError("parameters diverged");
    return next;
}

// Epsilon for the ascent step; zero when rho is zero or the gradient vanishes.
std::vector<double> ascent(const ParamVector& params, const std::vector<double>& grad, const PerturbConfig& pc) {
    if (pc.rho == 0.0) return std::vector<double>(params.size(), 0.0);
    try {
        return perturbation(params.values, grad, pc).epsilon;
    } catch (const ZeroGradient&) {
        return std::vector<double>(params.size(), 0.0);
    }
}

RobustStepResult robust_step(const LossGradFn& pooled, std::span<const LossGradFn> groups_fn,
                             const ParamVector& params, const GroupWeightState& state, const DroConfig& cfg,
                             bool perturb) {
    cfg.validate();
    const std::size_t groups = groups_fn.size();
    if (groups == 0) throw std::invalid_argument("robust step needs at least one group");
    if (state.size() != groups) throw ShapeError("group weight state does not match group count");
    if (cfg.adjustment_C > 0.0 && cfg.group_counts.size() != groups)
        throw ShapeError("group_counts must list every group when adjustment_C > 0");

    RobustStepResult out;
    auto& diag = out.diagnostics;

    // (1)-(2): pooled loss over the union and the shared perturbation
    std::vector<double> eps;
    if (perturb && cfg.rho > 0.0) {
        const LossGrad lg = pooled(params.values, true);
        diag.erm_loss_at_theta = lg.loss;
        eps = ascent(params, lg.grad, cfg.perturb_config());
    } else {
        diag.erm_loss_at_theta = pooled(params.values, false).loss;
        eps.assign(params.size(), 0.0);
    }
    diag.epsilon_l2_norm = vec::norm2(eps);
    ParamVector perturbed = params;
    vec::axpy(1.0, eps, perturbed.values);

    // (3): group losses and gradients at the same perturbed point
    std::vector<LossGrad> per_group;
    per_group.reserve(groups);
    for (const auto& f : groups_fn) per_group.push_back(f(perturbed.values, true));
    diag.per_group_loss_at_perturbed.resize(groups);
    diag.adjusted_group_loss.resize(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        diag.per_group_loss_at_perturbed[g] = per_group[g].loss;
        diag.adjusted_group_loss[g] =
            cfg.adjustment_C > 0.0 ? adjusted_group_loss(per_group[g].loss, cfg.group_counts[g], cfg.adjustment_C)
                                   : per_group[g].loss;
    }

    // (4): exponentiated weight update
    out.state = update_group_weights(state, diag.adjusted_group_loss, cfg.gamma);
    diag.lambdas_after = out.state.lambdas;
    diag.worst_group_index = argmax_lowest(diag.adjusted_group_loss);

    // (5)-(6): weighted gradient at theta + eps, applied at theta
    std::vector<double> direction(params.size(), 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        if (per_group[g].grad.size() != params.size()) throw ShapeError("group gradient has the wrong length");
        vec::axpy(out.state.lambdas[g], per_group[g].grad, direction);
    }
    clip_in_place(direction, cfg.clip_norm);
    out.params = descend(params, direction, cfg);
    diag.perturbed_params = std::move(perturbed.values);
    return out;
}

RobustStepResult robust_step(const ModelSpec& spec, const ParamVector& params,
                             std::span<const Batch> group_batches, const GroupWeightState& state,
                             const DroConfig& cfg, bool perturb) {
    for (const auto& b : group_batches)
        if (b.size() == 0) throw EmptyGroupError("empty group batch");
    if (group_batches.empty()) throw std::invalid_argument("robust step needs at least one group");
    const Batch pooled = concat_batches(group_batches);
    std::vector<LossGradFn> fns;
    fns.reserve(group_batches.size());
    for (const auto& b : group_batches) fns.push_back(batch_objective(spec, b));
    return robust_step(batch_objective(spec, pooled), fns, params, state, cfg, perturb);
}

PlainStepResult sharpness_step(const LossGradFn& f, const ParamVector& params, const DroConfig& cfg,
                               const PerturbConfig& pc) {
    cfg.validate();
    PlainStepResult out;
    LossGrad lg = f(params.values, true);
    out.loss_at_theta = lg.loss;
    std::vector<double> direction;
    if (pc.rho > 0.0) {
        const auto eps = ascent(params, lg.grad, pc);
        out.epsilon_l2_norm = vec::norm2(eps);
        ParamVector perturbed = params;
        vec::axpy(1.0, eps, perturbed.values);
        direction = f(perturbed.values, true).grad;
    } else {
        direction = std::move(lg.grad);
    }
    if (direction.size() != params.size()) throw ShapeError("gradient has the wrong length");
    clip_in_place(direction, cfg.clip_norm);
    out.params = descend(params, direction, cfg);
    return out;
}

}  // namespace

void DroConfig::validate() const {
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
    if (!(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
    if (!(xi >= 0.0)) throw std::invalid_argument("xi must be nonnegative");
    if (!(adjustment_C >= 0.0)) throw std::invalid_argument("adjustment_C must be nonnegative");
    if (!(clip_norm >= 0.0)) throw std::invalid_argument("clip_norm must be nonnegative");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be nonnegative");
    if (adjustment_C > 0.0)
        for (auto n : group_counts)
            if (n == 0) throw std::invalid_argument("group_counts must be positive when adjustment_C > 0");
}

GroupWeightState GroupWeightState::uniform(std::size_t groups) {
    if (groups == 0) throw std::invalid_argument("need at least one group");
    return {std::vector<double>(groups, 1.0 / static_cast<double>(groups))};
}

GroupWeightState update_group_weights(const GroupWeightState& state, std::span<const double> group_losses,
                                      double gamma) {
    if (group_losses.size() != state.size()) throw ShapeError("loss count does not match group count");
    if (!vec::all_finite(group_losses)) throw NonFiniteError("non-finite group loss");
    double shift = -INFINITY;
    for (double l : group_losses) shift = std::max(shift, gamma * l);
    GroupWeightState next;
    next.lambdas.resize(state.size());
    double total = 0.0;
    for (std::size_t g = 0; g < state.size(); ++g) {
        next.lambdas[g] = state.lambdas[g] * std::exp(gamma * group_losses[g] - shift);
        total += next.lambdas[g];
    }
    for (double& l : next.lambdas) l /= total;
    return next;
}

double adjusted_group_loss(double raw, std::size_t n_g, double C) {
    if (n_g == 0) throw std::invalid_argument("group size must be positive");
    if (C < 0.0) throw std::invalid_argument("C must be nonnegative");
    return raw + C / std::sqrt(static_cast<double>(n_g));
}

std::size_t argmax_lowest(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

Batch concat_batches(std::span<const Batch> batches) {
    if (batches.size() == 1) return batches.front();
    Batch out;
    std::size_t n = 0;
    bool weighted = false;
    for (const auto& b : batches) {
        n += b.size();
        weighted = weighted || !b.sample_weights.empty();
    }
    const std::size_t cols = batches.front().inputs.cols;
    out.inputs = Matrix(n, cols);
    out.labels.reserve(n);
    if (weighted) out.sample_weights.reserve(n);
    std::size_t row = 0;
    for (const auto& b : batches) {
        if (b.inputs.cols != cols) throw ShapeError("group batches differ in input width");
        std::copy(b.inputs.data.begin(), b.inputs.data.end(), out.inputs.data.begin() + row * cols);
        out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
        if (weighted)
            for (std::size_t i = 0; i < b.size(); ++i) out.sample_weights.push_back(b.weight(i));
        row += b.size();
    }
    return out;
}

LossGradFn batch_objective(const ModelSpec& spec, const Batch& batch) {
    return [&spec, &batch](std::span<const double> theta, bool need_grad) {
        const ParamVector p = ParamVector::from_values(spec, std::vector<double>(theta.begin(), theta.end()));
        if (need_grad) return loss_and_grad(spec, p, batch);
        return LossGrad{loss_value(spec, p, batch), {}};
    };
}

RobustStepResult asgdro_step(const LossGradFn& pooled, std::span<const LossGradFn> groups,
                             const ParamVector& params, const GroupWeightState& state, const DroConfig& cfg) {
    return robust_step(pooled, groups, params, state, cfg, true);
}

RobustStepResult gdro_step(const LossGradFn& pooled, std::span<const LossGradFn> groups,
                           const ParamVector& params, const GroupWeightState& state, const DroConfig& cfg) {
    return robust_step(pooled, groups, params, state, cfg, false);
}

PlainStepResult erm_step(const LossGradFn& objective, const ParamVector& params, const DroConfig& cfg) {
    return sharpness_step(objective, params, cfg, {0.0, Normalizer::None, cfg.xi});
}

PlainStepResult sam_step(const LossGradFn& objective, const ParamVector& params, const DroConfig& cfg) {
    return sharpness_step(objective, params, cfg, {cfg.rho, Normalizer::None, cfg.xi});
}

PlainStepResult asam_step(const LossGradFn& objective, const ParamVector& params, const DroConfig& cfg) {
    return sharpness_step(objective, params, cfg, {cfg.rho, Normalizer::Elementwise, cfg.xi});
}

RobustStepResult asgdro_step(const ModelSpec& spec, const ParamVector& params,
                             std::span<const Batch> group_batches, const GroupWeightState& state,
                             const DroConfig& cfg) {
    return robust_step(spec, params, group_batches, state, cfg, true);
}

RobustStepResult gdro_step(const ModelSpec& spec, const ParamVector& params,
                           std::span<const Batch> group_batches, const GroupWeightState& state,
                           const DroConfig& cfg) {
    return robust_step(spec, params, group_batches, state, cfg, false);
}

PlainStepResult erm_step(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                         const DroConfig& cfg) {
    return erm_step(batch_objective(spec, batch), params, cfg);
}

PlainStepResult sam_step(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                         const DroConfig& cfg) {
    return sam_step(batch_objective(spec, batch), params, cfg);
}

PlainStepResult asam_step(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                          const DroConfig& cfg) {
    return asam_step(batch_objective(spec, batch), params, cfg);
}

}  // namespace asgdro
