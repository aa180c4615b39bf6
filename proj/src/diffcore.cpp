#include "asgdro/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "asgdro/errors.hpp"
#include "asgdro/vecops.hpp"

namespace asgdro {

namespace {

constexpr std::size_t kChunkRows = 256;

double activate(Activation a, double z) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    return z;
}

// Derivative expressed through the pre-activation z and output y = act(z).
double activate_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

// Per-row scratch: pre-activations and outputs of every layer.
struct Workspace {
    std::vector<std::vector<double>> pre;   // pre[l]: layer l pre-activation
    std::vector<std::vector<double>> post;  // post[0] = input, post[l+1] = act(pre[l])
    std::vector<double> delta;
    std::vector<double> delta_prev;

    explicit Workspace(const ModelSpec& spec) {
        const std::size_t layers = spec.num_layers();
        pre.resize(layers);
        post.resize(layers + 1);
        post[0].resize(spec.input_dim());
        std::size_t widest = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            pre[l].resize(spec.layer_widths[l + 1]);
            post[l + 1].resize(spec.layer_widths[l + 1]);
        }
        for (auto w : spec.layer_widths) widest = std::max(widest, w);
        delta.resize(widest);
        delta_prev.resize(widest);
    }
};

// Leaves the logits in ws.post.back().
void forward_row(const ModelSpec& spec, const std::vector<LayerExtent>& layout,
                 std::span<const double> p, std::span<const double> x, Workspace& ws) {
    std::copy(x.begin(), x.end(), ws.post[0].begin());
    const std::size_t layers = layout.size();
    for (std::size_t l = 0; l < layers; ++l) {
        const auto& e = layout[l];
        const double* w = p.data() + e.weight_offset;
        const double* b = p.data() + e.bias_offset;
        const auto& in = ws.post[l];
        auto& z = ws.pre[l];
        auto& out = ws.post[l + 1];
        const bool hidden = l + 1 < layers;
        for (std::size_t o = 0; o < e.fan_out; ++o) {
            double acc = b[o];
            const double* wr = w + o * e.fan_in;
            for (std::size_t i = 0; i < e.fan_in; ++i) acc += wr[i] * in[i];
            z[o] = acc;
            out[o] = hidden ? activate(spec.activation, acc) : acc;
        }
    }
}

// Cross-entropy of the logits in ws; writes dL/dlogits into ws.delta.
double softmax_xent_row(Workspace& ws, std::size_t label, bool want_grad) {
    const auto& logits = ws.post.back();
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    const double lse = m + std::log(sum);
    if (want_grad) {
        for (std::size_t k = 0; k < logits.size(); ++k) ws.delta[k] = std::exp(logits[k] - lse);
        ws.delta[label] -= 1.0;
    }
    return lse - logits[label];
}

// Accumulates scale * dL/dtheta into grad, starting from ws.delta.
void backward_row(const ModelSpec& spec, const std::vector<LayerExtent>& layout,
                  std::span<const double> p, Workspace& ws, double scale, std::span<double> grad) {
    for (std::size_t l = layout.size(); l-- > 0;) {
        const auto& e = layout[l];
        const auto& in = ws.post[l];
        double* gw = grad.data() + e.weight_offset;
        double* gb = grad.data() + e.bias_offset;
        for (std::size_t o = 0; o < e.fan_out; ++o) {
            const double d = scale * ws.delta[o];
            gb[o] += d;
            double* gr = gw + o * e.fan_in;
            for (std::size_t i = 0; i < e.fan_in; ++i) gr[i] += d * in[i];
        }
        if (l == 0) break;
        const double* w = p.data() + e.weight_offset;
        for (std::size_t i = 0; i < e.fan_in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < e.fan_out; ++o) acc += w[o * e.fan_in + i] * ws.delta[o];
            ws.delta_prev[i] = acc * activate_grad(spec.activation, ws.pre[l - 1][i], ws.post[l][i]);
        }
        std::swap(ws.delta, ws.delta_prev);
    }
}

double total_weight(const Batch& batch) {
    if (batch.sample_weights.empty()) return static_cast<double>(batch.size());
    double s = 0.0;
    for (double w : batch.sample_weights) s += w;
    if (!(s > 0.0)) throw ShapeError("batch sample weights sum to zero");
    return s;
}

struct ChunkSums {
    double loss = 0.0;
    std::vector<double> grad;
};

LossGrad chunked_loss_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                           bool want_grad) {
    check_shapes(spec, params, batch);
    const std::size_t n = batch.size();
    const std::size_t chunks = (n + kChunkRows - 1) / kChunkRows;
    const std::size_t np = params.size();
    std::vector<ChunkSums> partial(chunks);

#pragma omp parallel for schedule(static) if (chunks > 1)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        Workspace ws(spec);
        auto& part = partial[static_cast<std::size_t>(c)];
        if (want_grad) part.grad.assign(np, 0.0);
        const std::size_t begin = static_cast<std::size_t>(c) * kChunkRows;
        const std::size_t end = std::min(n, begin + kChunkRows);
        for (std::size_t r = begin; r < end; ++r) {
            forward_row(spec, params.layout, params.values, batch.inputs.row(r), ws);
            const double w = batch.weight(r);
            part.loss += w * softmax_xent_row(ws, batch.labels[r], want_grad);
            if (want_grad) backward_row(spec, params.layout, params.values, ws, w, part.grad);
        }
    }

    LossGrad out;
    if (want_grad) out.grad.assign(np, 0.0);
    for (const auto& part : partial) {
        out.loss += part.loss;
        if (want_grad)
            for (std::size_t i = 0; i < np; ++i) out.grad[i] += part.grad[i];
    }
    const double inv = 1.0 / total_weight(batch);
    out.loss *= inv;
    for (double& g : out.grad) g *= inv;
    if (!std::isfinite(out.loss) || !vec::all_finite(out.grad))
        throw NonFiniteError("non-finite loss or gradient");
    return out;
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "relu";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

void ModelSpec::validate() const {
    if (layer_widths.size() < 2) throw ShapeError("model needs at least input and output widths");
    for (auto w : layer_widths)
        if (w == 0) throw ShapeError("layer widths must be positive");
}

std::vector<LayerExtent> param_layout(const ModelSpec& spec) {
    spec.validate();
    std::vector<LayerExtent> layout;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        LayerExtent e;
        e.fan_in = spec.layer_widths[l];
        e.fan_out = spec.layer_widths[l + 1];
        e.weight_offset = offset;
        e.bias_offset = offset + e.fan_in * e.fan_out;
        offset = e.bias_offset + e.fan_out;
        layout.push_back(e);
    }
    return layout;
}

std::size_t param_count(const ModelSpec& spec) {
    const auto layout = param_layout(spec);
    return layout.back().bias_offset + layout.back().fan_out;
}

ParamVector ParamVector::zeros(const ModelSpec& spec) {
    ParamVector p;
    p.layout = param_layout(spec);
    p.values.assign(param_count(spec), 0.0);
    return p;
}

ParamVector ParamVector::from_values(const ModelSpec& spec, std::vector<double> values) {
    ParamVector p;
    p.layout = param_layout(spec);
    if (values.size() != param_count(spec)) throw ShapeError("parameter count does not match model");
    p.values = std::move(values);
    return p;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    ParamVector p = ParamVector::zeros(spec);
    std::mt19937_64 rng(seed);
    for (const auto& e : p.layout) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < e.fan_in * e.fan_out; ++i) p.values[e.weight_offset + i] = dist(rng);
    }
    return p;
}

void check_shapes(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    spec.validate();
    if (params.size() != param_count(spec)) throw ShapeError("parameter count does not match model");
    if (params.layout.size() != spec.num_layers()) throw ShapeError("parameter layout does not match model");
    if (batch.size() == 0) throw ShapeError("empty batch");
    if (batch.inputs.rows != batch.size()) throw ShapeError("input rows do not match label count");
    if (batch.inputs.cols != spec.input_dim()) throw ShapeError("input width does not match model");
    for (auto y : batch.labels)
        if (y >= spec.output_dim()) throw ShapeError("label out of range");
    if (!batch.sample_weights.empty()) {
        if (batch.sample_weights.size() != batch.size()) throw ShapeError("sample weight count mismatch");
        for (double w : batch.sample_weights)
            if (!std::isfinite(w) || w < 0.0) throw ShapeError("sample weights must be finite and nonnegative");
    }
}

Matrix forward(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    check_shapes(spec, params, batch);
    const std::size_t n = batch.size();
    Matrix logits(n, spec.output_dim());
    const std::size_t chunks = (n + kChunkRows - 1) / kChunkRows;
#pragma omp parallel for schedule(static) if (chunks > 1)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        Workspace ws(spec);
        const std::size_t begin = static_cast<std::size_t>(c) * kChunkRows;
        const std::size_t end = std::min(n, begin + kChunkRows);
        for (std::size_t r = begin; r < end; ++r) {
            forward_row(spec, params.layout, params.values, batch.inputs.row(r), ws);
            std::copy(ws.post.back().begin(), ws.post.back().end(), logits.row(r).begin());
        }
    }
    if (!vec::all_finite(logits.data)) throw NonFiniteError("non-finite logits");
    return logits;
}

LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    return chunked_loss_grad(spec, params, batch, true);
}

double loss_value(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    return chunked_loss_grad(spec, params, batch, false).loss;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

std::vector<double> finite_diff_grad(const ModelSpec& spec, const ParamVector& params,
                                     const Batch& batch, double h) {
    ParamVector probe = params;
    return central_difference(
        [&](std::span<const double> x) {
            std::copy(x.begin(), x.end(), probe.values.begin());
            return loss_value(spec, probe, batch);
        },
        params.values, h);
}

std::vector<std::size_t> predict(const ModelSpec& spec, const ParamVector& params, const Matrix& inputs) {
    Batch b;
    b.inputs = inputs;
    b.labels.assign(inputs.rows, 0);
    const Matrix logits = forward(spec, params, b);
    std::vector<std::size_t> out(inputs.rows);
    for (std::size_t r = 0; r < inputs.rows; ++r) {
        auto row = logits.row(r);
        out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

namespace serial {

Matrix forward(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    check_shapes(spec, params, batch);
    Matrix logits(batch.size(), spec.output_dim());
    Workspace ws(spec);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        forward_row(spec, params.layout, params.values, batch.inputs.row(r), ws);
        std::copy(ws.post.back().begin(), ws.post.back().end(), logits.row(r).begin());
    }
    return logits;
}

LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    check_shapes(spec, params, batch);
    LossGrad out;
    out.grad.assign(params.size(), 0.0);
    Workspace ws(spec);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        forward_row(spec, params.layout, params.values, batch.inputs.row(r), ws);
        const double w = batch.weight(r);
        out.loss += w * softmax_xent_row(ws, batch.labels[r], true);
        backward_row(spec, params.layout, params.values, ws, w, out.grad);
    }
    const double inv = 1.0 / total_weight(batch);
    out.loss *= inv;
    for (double& g : out.grad) g *= inv;
    if (!std::isfinite(out.loss) || !vec::all_finite(out.grad))
        throw NonFiniteError("non-finite loss or gradient");
    return out;
}

}  // namespace serial

}  // namespace asgdro
