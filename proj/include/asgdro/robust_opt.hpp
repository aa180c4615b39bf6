#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "asgdro/diffcore.hpp"
#include "asgdro/sharpness.hpp"

namespace asgdro {

struct DroConfig {
    double eta = 0.1;          // learning rate
    double gamma = 0.01;       // robust step size of the group-weight update
    double rho = 0.0;          // ascent radius; 0 disables the ascent step
    Normalizer normalizer = Normalizer::Elementwise;
    double xi = 0.01;
    double adjustment_C = 0.0;
    std::vector<std::size_t> group_counts;  // training-set size per group
    double clip_norm = 0.0;                 // descent-gradient clipping, 0 = off
    double weight_decay = 0.0;              // L2 coefficient added to the descent gradient

    void validate() const;
    PerturbConfig perturb_config() const { return {rho, normalizer, xi}; }
};

// Group weights on the probability simplex.
struct GroupWeightState {
    std::vector<double> lambdas;

    static GroupWeightState uniform(std::size_t groups);
    std::size_t size() const { return lambdas.size(); }
};

struct StepDiagnostics {
    double erm_loss_at_theta = 0.0;
    std::vector<double> per_group_loss_at_perturbed;
    // Losses after the C / sqrt(n_g) adjustment; equal to the raw losses when C = 0.
    std::vector<double> adjusted_group_loss;
    double epsilon_l2_norm = 0.0;
    std::vector<double> lambdas_after;
    std::size_t worst_group_index = 0;
    // The single parameter point every group loss was evaluated at.
    std::vector<double> perturbed_params;
};

struct RobustStepResult {
    ParamVector params;
    GroupWeightState state;
    StepDiagnostics diagnostics;
};

struct PlainStepResult {
    ParamVector params;
    double loss_at_theta = 0.0;
    double epsilon_l2_norm = 0.0;
};

// lambda_g <- lambda_g * exp(gamma * L_g), renormalized. The maximum of
// gamma * L_g is subtracted before exponentiation.
GroupWeightState update_group_weights(const GroupWeightState& state, std::span<const double> group_losses,
                                      double gamma);

double adjusted_group_loss(double raw, std::size_t n_g, double C);

// Index of the largest value, lowest index on ties.
std::size_t argmax_lowest(std::span<const double> values);

Batch concat_batches(std::span<const Batch> batches);

// Loss (and, when asked, gradient) of some objective at a parameter point.
// The steppers below are written against this so they run unchanged on MLP
// batches and on closed-form test objectives.
using LossGradFn = std::function<LossGrad(std::span<const double> params, bool need_grad)>;

LossGradFn batch_objective(const ModelSpec& spec, const Batch& batch);

RobustStepResult asgdro_step(const LossGradFn& pooled, std::span<const LossGradFn> groups,
                             const ParamVector& params, const GroupWeightState& state, const DroConfig& cfg);
RobustStepResult gdro_step(const LossGradFn& pooled, std::span<const LossGradFn> groups,
                           const ParamVector& params, const GroupWeightState& state, const DroConfig& cfg);
PlainStepResult erm_step(const LossGradFn& objective, const ParamVector& params, const DroConfig& cfg);
PlainStepResult sam_step(const LossGradFn& objective, const ParamVector& params, const DroConfig& cfg);
PlainStepResult asam_step(const LossGradFn& objective, const ParamVector& params, const DroConfig& cfg);

// One ASGDRO iteration: shared perturbation from the pooled gradient at theta,
// group losses at theta + eps, exponentiated weight update, weighted descent
// gradient at theta + eps applied at theta.
RobustStepResult asgdro_step(const ModelSpec& spec, const ParamVector& params,
                             std::span<const Batch> group_batches, const GroupWeightState& state,
                             const DroConfig& cfg);

// asgdro_step with the perturbation forced to zero.
RobustStepResult gdro_step(const ModelSpec& spec, const ParamVector& params,
                           std::span<const Batch> group_batches, const GroupWeightState& state,
                           const DroConfig& cfg);

PlainStepResult erm_step(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                         const DroConfig& cfg);
// Uses cfg.rho with the L2 ball regardless of cfg.normalizer.
PlainStepResult sam_step(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                         const DroConfig& cfg);
// Uses cfg.rho and cfg.xi with the elementwise normalizer.
PlainStepResult asam_step(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                          const DroConfig& cfg);

}  // namespace asgdro
