#include "verse/semantic_memory.hpp"

#include <string>

#include "verse/error.hpp"

namespace verse {

namespace {

void check_unit_interval(const char* name, double value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw Error(std::string(name) + " in [0,1] required, got " + std::to_string(value));
    }
}

}  // namespace

SemanticMemory::SemanticMemory(const ParamVector& theta, double gamma, double accept_rate, std::uint64_t seed)
    : phi_(theta), gamma_(gamma), accept_rate_(accept_rate), rng_(seed) {
    check_unit_interval("gamma", gamma);
    check_unit_interval("accept_rate", accept_rate);
}

SemanticMemory SemanticMemory::restore(ParamVector phi, double gamma, double accept_rate, std::mt19937_64 rng) {
    check_unit_interval("gamma", gamma);
    check_unit_interval("accept_rate", accept_rate);
    SemanticMemory m;
    m.phi_ = std::move(phi);
    m.gamma_ = gamma;
    m.accept_rate_ = accept_rate;
    m.rng_ = rng;
    return m;
}

bool SemanticMemory::maybe_update(const ParamVector& theta) {
    if (!(theta.shape() == phi_.shape())) {
        throw DimensionError("semantic memory update: parameter count", phi_.size(), theta.size());
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng_) >= accept_rate_) return false;
    auto phi = phi_.values();
    for (std::size_t i = 0; i < phi.size(); ++i) {
        phi[i] = gamma_ * phi[i] + (1.0 - gamma_) * theta[i];
    }
    return true;
}

Matrix SemanticMemory::distill_targets(const Matrix& inputs) const {
    return forward(phi_, inputs);
}

}  // namespace verse
