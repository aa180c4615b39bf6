#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace asgdro {

enum class Activation { ReLU, Tanh, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

// Multilayer perceptron with softmax cross-entropy head. The activation is
// applied to hidden layers only; the last layer emits raw logits.
struct ModelSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::ReLU;

    std::size_t input_dim() const { return layer_widths.front(); }
    std::size_t output_dim() const { return layer_widths.back(); }
    std::size_t num_layers() const { return layer_widths.size() - 1; }

    // Throws ShapeError when fewer than two widths or a zero width.
    void validate() const;
};

// Offsets of one layer's weight matrix (fan_out x fan_in, row-major) and
// bias inside the flat parameter vector.
struct LayerExtent {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

std::vector<LayerExtent> param_layout(const ModelSpec& spec);
std::size_t param_count(const ModelSpec& spec);

struct ParamVector {
    std::vector<double> values;
    std::vector<LayerExtent> layout;

    std::size_t size() const { return values.size(); }
    std::span<const double> view() const { return values; }

    static ParamVector zeros(const ModelSpec& spec);
    static ParamVector from_values(const ModelSpec& spec, std::vector<double> values);
};

struct Batch {
    Matrix inputs;
    std::vector<std::size_t> labels;
    // Empty means every example has weight 1.
    std::vector<double> sample_weights;

    std::size_t size() const { return labels.size(); }
    double weight(std::size_t i) const { return sample_weights.empty() ? 1.0 : sample_weights[i]; }
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

Matrix forward(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Weighted mean cross-entropy, sample weights renormalized to mean one, and
// its exact gradient. Rows are processed in fixed-size chunks spread over
// OpenMP threads and reduced in chunk order, so the result does not depend
// on the thread count.
LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Loss only; same reduction order as loss_and_grad.
double loss_value(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Central differences (L(x + h e_i) - L(x - h e_i)) / 2h for every coordinate.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h);

std::vector<double> finite_diff_grad(const ModelSpec& spec, const ParamVector& params,
                                     const Batch& batch, double h);

// Per-row argmax of the logits.
std::vector<std::size_t> predict(const ModelSpec& spec, const ParamVector& params, const Matrix& inputs);

// Straight-line single-threaded kernels kept as the reference the parallel
// versions are tested and benchmarked against.
namespace serial {
Matrix forward(const ModelSpec& spec, const ParamVector& params, const Batch& batch);
LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch);
}  // namespace serial

// Shape checks shared by the kernels.
void check_shapes(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

}  // namespace asgdro
