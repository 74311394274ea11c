#ifndef VERSE_NETWORK_HPP
#define VERSE_NETWORK_HPP

// Plastic MLP head: forward pass, losses, hand-derived gradients and
// parameter arithmetic. Everything here is a pure function over values.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace verse {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { relu, leaky_relu, tanh };

[[nodiscard]] std::string_view to_string(Activation activation);
[[nodiscard]] Activation parse_activation(std::string_view name);

struct NetworkShape {
    std::size_t input_dim{1};
    std::vector<std::size_t> hidden_dims{};
    std::size_t num_classes{2};
    Activation activation{Activation::relu};

    /// Throws verse::Error unless num_classes >= 2 and every width >= 1.
    void validate() const;
    [[nodiscard]] std::size_t param_count() const;
    [[nodiscard]] std::size_t num_layers() const { return hidden_dims.size() + 1; }
    /// Fan-in of layer `layer` (0-based, output layer last).
    [[nodiscard]] std::size_t layer_in(std::size_t layer) const;
    [[nodiscard]] std::size_t layer_out(std::size_t layer) const;

    friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Flat parameter storage. Layer l occupies a row-major out x in weight
/// block followed by its out-length bias, layers in input-to-output order.
class ParamVector {
public:
    ParamVector() = default;
    /// Zero-initialized parameters for `shape`.
    explicit ParamVector(NetworkShape shape);
    ParamVector(NetworkShape shape, std::vector<double> values);

    /// Fan-in-scaled uniform init: weights ~ U(-1/sqrt(in), 1/sqrt(in)), biases 0.
    [[nodiscard]] static ParamVector initialize(const NetworkShape& shape, std::uint64_t seed);

    [[nodiscard]] const NetworkShape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] double& operator[](std::size_t i) { return values_[i]; }

    [[nodiscard]] std::size_t weight_offset(std::size_t layer) const;
    [[nodiscard]] std::size_t bias_offset(std::size_t layer) const;

    [[nodiscard]] bool all_finite() const;
    /// FNV-1a over the raw bytes of the values; used for bit-exact comparisons.
    [[nodiscard]] std::uint64_t checksum() const;

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    NetworkShape shape_{};
    std::vector<double> values_{};
};

struct Batch {
    Matrix inputs;            // n x input_dim
    std::vector<int> labels;  // n entries in [0, K)

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    void validate(const NetworkShape& shape) const;
};

/// Self-distillation term: lambda * MSE(F(inputs), targets).
struct DistillTerm {
    const Matrix& inputs;
    const Matrix& targets;
    double lambda;
};

/// CE on `ce_batch`, optionally plus a distillation term on a second batch.
struct LossSpec {
    const Batch& ce_batch;
    std::optional<DistillTerm> distill{};
};

[[nodiscard]] Matrix forward(const ParamVector& params, const Matrix& inputs);
[[nodiscard]] double cross_entropy(const Matrix& logits, std::span<const int> labels);
[[nodiscard]] double mse_logits(const Matrix& a, const Matrix& b);
[[nodiscard]] double loss(const ParamVector& params, const LossSpec& spec);
[[nodiscard]] ParamVector gradient(const ParamVector& params, const LossSpec& spec);
[[nodiscard]] ParamVector gradient(const ParamVector& params, const Batch& batch);
/// params - lr * grad.
[[nodiscard]] ParamVector axpy_update(const ParamVector& params, const ParamVector& grad, double lr);

/// Argmax per row, ties to the lowest class index.
[[nodiscard]] std::vector<int> predict(const ParamVector& params, const Matrix& inputs);

enum class ExtractorKind { random_projection, identity };

/// Frozen feature extractor: z = tanh(P^T x) for a seeded Gaussian P, or the identity.
class FrozenExtractor {
public:
    FrozenExtractor(std::size_t raw_dim, std::size_t output_dim, std::uint64_t seed);
    [[nodiscard]] static FrozenExtractor identity(std::size_t dim);

    [[nodiscard]] std::vector<double> extract(std::span<const double> raw) const;

    [[nodiscard]] ExtractorKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t raw_dim() const noexcept { return raw_dim_; }
    [[nodiscard]] std::size_t output_dim() const noexcept { return output_dim_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] const Matrix& projection() const noexcept { return projection_; }

private:
    FrozenExtractor() = default;

    ExtractorKind kind_{ExtractorKind::random_projection};
    std::size_t raw_dim_{0};
    std::size_t output_dim_{0};
    std::uint64_t seed_{0};
    Matrix projection_{};  // raw_dim x output_dim
};

}  // namespace verse

#endif  // VERSE_NETWORK_HPP
