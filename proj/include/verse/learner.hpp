#ifndef VERSE_LEARNER_HPP
#define VERSE_LEARNER_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "verse/episodic_memory.hpp"
#include "verse/semantic_memory.hpp"

namespace verse {

enum class InferenceModel { working, semantic };

[[nodiscard]] std::string_view to_string(InferenceModel model);
[[nodiscard]] InferenceModel parse_inference_model(std::string_view name);

struct VerseConfig {
    double alpha{0.005};          // virtual step
    double beta{0.01};            // global step
    double lambda_distill{0.3};   // weight of the self-distillation MSE
    double gamma{0.9};            // EMA momentum of the semantic memory
    double accept_rate{0.4};      // probability of an EMA update per step
    std::size_t replay_count{16}; // C, size of each rehearsal subset
    std::size_t buffer_capacity{200};
    ReplacementPolicy policy{ReplacementPolicy::reservoir};
    InferenceModel inference_model{InferenceModel::working};

    void validate() const;
};

enum class LearnerKind { verse, replay, finetune };

[[nodiscard]] std::string_view to_string(LearnerKind kind);
[[nodiscard]] LearnerKind parse_learner(std::string_view name);

struct LearnerConfig {
    LearnerKind kind{LearnerKind::verse};
    VerseConfig verse{};
    /// Step size of the fine-tune and replay baselines.
    double baseline_lr{0.01};

    void validate() const;
};

/// Everything carried from one stream step to the next.
struct LearnerState {
    ParamVector theta;
    SemanticMemory sem;
    EpisodicBuffer buffer;
    std::uint64_t step_count{0};
    std::mt19937_64 replay_rng;

    /// theta from a seeded init, phi = theta, empty buffer. Each RNG gets its
    /// own stream derived from `seed`.
    [[nodiscard]] static LearnerState create(const NetworkShape& shape, const VerseConfig& cfg, std::uint64_t seed);

    [[nodiscard]] std::uint64_t checksum() const;

    friend bool operator==(const LearnerState&, const LearnerState&) = default;
};

/// theta - alpha * grad CE(theta; {sample} + subset(buffer, C)). Does not touch theta.
[[nodiscard]] ParamVector virtual_update(const ParamVector& theta, const FeatureSample& sample,
                                         const EpisodicBuffer& buffer, double alpha, std::size_t replay_count,
                                         std::mt19937_64& rng);

/// theta - beta * grad L(theta_v), L = CE on one memory subset plus lambda *
/// MSE between the semantic memory's logits and theta_v's logits on another.
/// The gradient is taken at theta_v as an independent point (first order).
/// Returns nullopt when the buffer is empty.
[[nodiscard]] std::optional<ParamVector> global_update(const ParamVector& theta, const ParamVector& theta_v,
                                                       const SemanticMemory& sem, const EpisodicBuffer& buffer,
                                                       double beta, double lambda, std::size_t replay_count,
                                                       std::mt19937_64& rng);

/// One full VERSE iteration: virtual update, global update (or theta <- theta_v
/// while the buffer is empty), stochastic EMA of phi, buffer insert, t += 1.
/// Validation failures leave the state untouched.
void process_stream_step(LearnerState& state, const FeatureSample& sample, const VerseConfig& cfg);

/// Plain SGD on the lone sample. Buffer and phi are left alone.
void finetune_step(LearnerState& state, const FeatureSample& sample, double lr);

/// Experience replay: one SGD step on {sample} + subset(buffer, C), then insert.
void replay_step(LearnerState& state, const FeatureSample& sample, double lr, std::size_t replay_count);

void learner_step(LearnerState& state, const FeatureSample& sample, const LearnerConfig& cfg);

[[nodiscard]] const ParamVector& inference_params(const LearnerState& state, InferenceModel model);

// Checkpoints: a versioned JSON document holding theta, phi, the buffer,
// the step counter and every RNG state. Loading resumes bit-exactly.
[[nodiscard]] std::string serialize_checkpoint(const LearnerState& state);
[[nodiscard]] LearnerState deserialize_checkpoint(std::string_view text);
void save_checkpoint(const LearnerState& state, const std::filesystem::path& path);
[[nodiscard]] LearnerState load_checkpoint(const std::filesystem::path& path);

}  // namespace verse

#endif  // VERSE_LEARNER_HPP
