#ifndef VERSE_SEMANTIC_MEMORY_HPP
#define VERSE_SEMANTIC_MEMORY_HPP

#include <cstdint>
#include <random>

#include "verse/network.hpp"

namespace verse {

/// Long-term semantic memory: a shadow copy of the working parameters that
/// follows them by a stochastically gated exponential moving average and
/// provides the self-distillation targets.
class SemanticMemory {
public:
    SemanticMemory() = default;
    /// phi starts equal to `theta`. gamma is the EMA momentum, accept_rate the
    /// per-call probability of applying it. Both must lie in [0, 1].
    SemanticMemory(const ParamVector& theta, double gamma, double accept_rate, std::uint64_t seed);

    /// Draws u ~ U(0,1); if u < accept_rate, phi <- gamma * phi + (1 - gamma) * theta.
    bool maybe_update(const ParamVector& theta);

    /// Logits of the plastic network under phi.
    [[nodiscard]] Matrix distill_targets(const Matrix& inputs) const;

    [[nodiscard]] const ParamVector& phi() const noexcept { return phi_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] double accept_rate() const noexcept { return accept_rate_; }
    [[nodiscard]] const std::mt19937_64& rng() const noexcept { return rng_; }

    [[nodiscard]] static SemanticMemory restore(ParamVector phi, double gamma, double accept_rate,
                                                std::mt19937_64 rng);

    friend bool operator==(const SemanticMemory&, const SemanticMemory&) = default;

private:
    ParamVector phi_{};
    double gamma_{0.9};
    double accept_rate_{0.1};
    std::mt19937_64 rng_{};
};

}  // namespace verse

#endif  // VERSE_SEMANTIC_MEMORY_HPP
