#include "verse/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "verse/error.hpp"

namespace verse {

namespace {

constexpr double kLeakySlope = 0.01;

using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstRowVectorMap = Eigen::Map<const Eigen::RowVectorXd>;
using RowVectorMap = Eigen::Map<Eigen::RowVectorXd>;

void activate(Matrix& z, Activation activation) {
    switch (activation) {
        case Activation::relu:
            z = z.cwiseMax(0.0);
            break;
        case Activation::leaky_relu:
            z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
            break;
        case Activation::tanh:
            z = z.array().tanh().matrix();
            break;
    }
}

// Multiplies `upstream` in place by the activation derivative, given the
// pre-activation and post-activation values of the layer.
void activation_backward(Matrix& upstream, const Matrix& pre, const Matrix& post, Activation activation) {
    switch (activation) {
        case Activation::relu:
            upstream = upstream.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
            break;
        case Activation::leaky_relu:
            upstream = upstream.cwiseProduct(
                pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
            break;
        case Activation::tanh:
            upstream = upstream.cwiseProduct((1.0 - post.array().square()).matrix());
            break;
    }
}

ConstMatrixMap weights(const ParamVector& p, std::size_t layer) {
    const auto& s = p.shape();
    return {p.values().data() + p.weight_offset(layer), static_cast<Eigen::Index>(s.layer_out(layer)),
            static_cast<Eigen::Index>(s.layer_in(layer))};
}

ConstRowVectorMap bias(const ParamVector& p, std::size_t layer) {
    return {p.values().data() + p.bias_offset(layer), static_cast<Eigen::Index>(p.shape().layer_out(layer))};
}

struct ForwardTrace {
    std::vector<Matrix> pre;   // pre-activation per layer (last = logits)
    std::vector<Matrix> post;  // post-activation per hidden layer
};

ForwardTrace forward_trace(const ParamVector& params, const Matrix& inputs) {
    const auto& shape = params.shape();
    require_dim("forward: input column count", shape.input_dim, static_cast<std::size_t>(inputs.cols()));
    ForwardTrace trace;
    trace.pre.reserve(shape.num_layers());
    trace.post.reserve(shape.num_layers() - 1);
    const Matrix* current = &inputs;
    for (std::size_t l = 0; l < shape.num_layers(); ++l) {
        Matrix z = *current * weights(params, l).transpose();
        z.rowwise() += bias(params, l);
        trace.pre.push_back(std::move(z));
        if (l + 1 < shape.num_layers()) {
            Matrix a = trace.pre.back();
            activate(a, shape.activation);
            trace.post.push_back(std::move(a));
            current = &trace.post.back();
        }
    }
    return trace;
}

Matrix log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

void check_labels(std::span<const int> labels, std::size_t num_classes) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw Error("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                        " outside [0, " + std::to_string(num_classes) + ")");
        }
    }
}

}  // namespace

std::string_view to_string(Activation activation) {
    switch (activation) {
        case Activation::relu:
            return "relu";
        case Activation::leaky_relu:
            return "leaky_relu";
        case Activation::tanh:
            return "tanh";
    }
    return "relu";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "tanh") return Activation::tanh;
    throw Error("unknown activation '" + std::string(name) + "'");
}

void NetworkShape::validate() const {
    if (input_dim < 1) throw Error("network input_dim must be >= 1");
    if (num_classes < 2) throw Error("network num_classes must be >= 2");
    for (auto h : hidden_dims) {
        if (h < 1) throw Error("network hidden widths must be >= 1");
    }
}

std::size_t NetworkShape::layer_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

std::size_t NetworkShape::layer_out(std::size_t layer) const {
    return layer < hidden_dims.size() ? hidden_dims[layer] : num_classes;
}

std::size_t NetworkShape::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        n += layer_out(l) * (layer_in(l) + 1);
    }
    return n;
}

ParamVector::ParamVector(NetworkShape shape) : shape_(std::move(shape)) {
    shape_.validate();
    values_.assign(shape_.param_count(), 0.0);
}

ParamVector::ParamVector(NetworkShape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    shape_.validate();
    require_dim("parameter vector length", shape_.param_count(), values_.size());
}

ParamVector ParamVector::initialize(const NetworkShape& shape, std::uint64_t seed) {
    ParamVector p(shape);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < shape.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(shape.layer_in(l)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const std::size_t begin = p.weight_offset(l);
        const std::size_t end = begin + shape.layer_out(l) * shape.layer_in(l);
        for (std::size_t i = begin; i < end; ++i) p.values_[i] = dist(rng);
    }
    return p;
}

std::size_t ParamVector::weight_offset(std::size_t layer) const {
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        offset += shape_.layer_out(l) * (shape_.layer_in(l) + 1);
    }
    return offset;
}

std::size_t ParamVector::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + shape_.layer_out(layer) * shape_.layer_in(layer);
}

bool ParamVector::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t ParamVector::checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : values_) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

void Batch::validate(const NetworkShape& shape) const {
    if (labels.empty()) throw Error("batch is empty");
    require_dim("batch row count", labels.size(), static_cast<std::size_t>(inputs.rows()));
    require_dim("batch input dim", shape.input_dim, static_cast<std::size_t>(inputs.cols()));
    check_labels(labels, shape.num_classes);
}

Matrix forward(const ParamVector& params, const Matrix& inputs) {
    return std::move(forward_trace(params, inputs).pre.back());
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
    if (labels.empty()) throw Error("cross_entropy: empty batch");
    require_dim("cross_entropy: label count", static_cast<std::size_t>(logits.rows()), labels.size());
    check_labels(labels, static_cast<std::size_t>(logits.cols()));
    const Matrix logp = log_softmax(logits);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total -= logp(static_cast<Eigen::Index>(i), labels[i]);
    }
    return total / static_cast<double>(labels.size());
}

double mse_logits(const Matrix& a, const Matrix& b) {
    require_dim("mse_logits: row count", static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(b.rows()));
    require_dim("mse_logits: column count", static_cast<std::size_t>(a.cols()), static_cast<std::size_t>(b.cols()));
    if (a.size() == 0) throw Error("mse_logits: empty input");
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

double loss(const ParamVector& params, const LossSpec& spec) {
    spec.ce_batch.validate(params.shape());
    double value = cross_entropy(forward(params, spec.ce_batch.inputs), spec.ce_batch.labels);
    if (spec.distill) {
        value += spec.distill->lambda * mse_logits(forward(params, spec.distill->inputs), spec.distill->targets);
    }
    return value;
}

namespace {

// Accumulates into `grad` the parameter gradient given dL/dlogits.
void backprop(const ParamVector& params, const Matrix& inputs, const ForwardTrace& trace, Matrix upstream,
              ParamVector& grad) {
    const auto& shape = params.shape();
    for (std::size_t l = shape.num_layers(); l-- > 0;) {
        const Matrix& layer_input = l == 0 ? inputs : trace.post[l - 1];
        MatrixMap dw(grad.values().data() + grad.weight_offset(l), static_cast<Eigen::Index>(shape.layer_out(l)),
                     static_cast<Eigen::Index>(shape.layer_in(l)));
        RowVectorMap db(grad.values().data() + grad.bias_offset(l), static_cast<Eigen::Index>(shape.layer_out(l)));
        dw.noalias() += upstream.transpose() * layer_input;
        db += upstream.colwise().sum();
        if (l > 0) {
            Matrix next = upstream * weights(params, l);
            activation_backward(next, trace.pre[l - 1], trace.post[l - 1], shape.activation);
            upstream = std::move(next);
        }
    }
}

}  // namespace

ParamVector gradient(const ParamVector& params, const LossSpec& spec) {
    const auto& batch = spec.ce_batch;
    batch.validate(params.shape());
    ParamVector grad(params.shape());

    {
        const ForwardTrace trace = forward_trace(params, batch.inputs);
        Matrix d = log_softmax(trace.pre.back()).array().exp().matrix();
        for (std::size_t i = 0; i < batch.size(); ++i) {
            d(static_cast<Eigen::Index>(i), batch.labels[i]) -= 1.0;
        }
        d /= static_cast<double>(batch.size());
        backprop(params, batch.inputs, trace, std::move(d), grad);
    }

    if (spec.distill && spec.distill->lambda != 0.0) {
        const auto& term = *spec.distill;
        const ForwardTrace trace = forward_trace(params, term.inputs);
        const Matrix& logits = trace.pre.back();
        require_dim("distill targets rows", static_cast<std::size_t>(logits.rows()),
                    static_cast<std::size_t>(term.targets.rows()));
        require_dim("distill targets cols", static_cast<std::size_t>(logits.cols()),
                    static_cast<std::size_t>(term.targets.cols()));
        Matrix d = (logits - term.targets) * (2.0 * term.lambda / static_cast<double>(logits.size()));
        backprop(params, term.inputs, trace, std::move(d), grad);
    }
    return grad;
}

ParamVector gradient(const ParamVector& params, const Batch& batch) {
    return gradient(params, LossSpec{batch});
}

ParamVector axpy_update(const ParamVector& params, const ParamVector& grad, double lr) {
    require_dim("axpy_update: gradient length", params.size(), grad.size());
    std::vector<double> out(params.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = params[i] - lr * grad[i];
    }
    return ParamVector(params.shape(), std::move(out));
}

std::vector<int> predict(const ParamVector& params, const Matrix& inputs) {
    const Matrix logits = forward(params, inputs);
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < logits.cols(); ++k) {
            if (logits(i, k) > logits(i, best)) best = k;
        }
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

FrozenExtractor::FrozenExtractor(std::size_t raw_dim, std::size_t output_dim, std::uint64_t seed)
    : kind_(ExtractorKind::random_projection), raw_dim_(raw_dim), output_dim_(output_dim), seed_(seed) {
    if (raw_dim == 0 || output_dim == 0) throw Error("extractor dimensions must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(raw_dim)));
    projection_.resize(static_cast<Eigen::Index>(raw_dim), static_cast<Eigen::Index>(output_dim));
    for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = dist(rng);
}

FrozenExtractor FrozenExtractor::identity(std::size_t dim) {
    if (dim == 0) throw Error("extractor dimensions must be >= 1");
    FrozenExtractor e;
    e.kind_ = ExtractorKind::identity;
    e.raw_dim_ = dim;
    e.output_dim_ = dim;
    return e;
}

std::vector<double> FrozenExtractor::extract(std::span<const double> raw) const {
    require_dim("extract: raw feature length", raw_dim_, raw.size());
    if (kind_ == ExtractorKind::identity) return {raw.begin(), raw.end()};
    std::vector<double> z(output_dim_, 0.0);
    for (std::size_t j = 0; j < output_dim_; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < raw_dim_; ++i) {
            acc += projection_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * raw[i];
        }
        z[j] = std::tanh(acc);
    }
    return z;
}

}  // namespace verse
