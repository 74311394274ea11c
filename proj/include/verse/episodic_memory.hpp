#ifndef VERSE_EPISODIC_MEMORY_HPP
#define VERSE_EPISODIC_MEMORY_HPP

#include <cstdint>
#include <map>
#include <random>
#include <string_view>
#include <vector>

#include "verse/feature_sample.hpp"

namespace verse {

enum class ReplacementPolicy { reservoir, class_balanced };

[[nodiscard]] std::string_view to_string(ReplacementPolicy policy);
[[nodiscard]] ReplacementPolicy parse_policy(std::string_view name);

/// Tiny episodic memory: a fixed-capacity store of feature embeddings.
///
/// Below capacity every offered sample is appended. Once full:
///  - reservoir keeps the t-th offered sample with probability capacity / t,
///    overwriting a uniformly chosen resident;
///  - class_balanced always stores the new sample, evicting a uniform
///    resident of the most populated class (ties broken uniformly).
///
/// Not thread-safe; insert must be serialized with readers.
class EpisodicBuffer {
public:
    EpisodicBuffer() = default;
    EpisodicBuffer(std::size_t capacity, ReplacementPolicy policy, std::uint64_t seed);

    void insert(FeatureSample sample);

    /// Uniform sample without replacement of min(count, size()) residents.
    [[nodiscard]] std::vector<FeatureSample> sample_subset(std::size_t count, std::mt19937_64& rng) const;

    [[nodiscard]] std::map<int, std::size_t> class_histogram() const;

    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }
    [[nodiscard]] std::uint64_t seen_count() const noexcept { return seen_count_; }
    [[nodiscard]] ReplacementPolicy policy() const noexcept { return policy_; }
    [[nodiscard]] const std::vector<FeatureSample>& samples() const noexcept { return samples_; }
    [[nodiscard]] const std::mt19937_64& rng() const noexcept { return rng_; }

    [[nodiscard]] std::uint64_t checksum() const;

    /// Rebuilds a buffer from checkpointed parts.
    [[nodiscard]] static EpisodicBuffer restore(std::size_t capacity, ReplacementPolicy policy,
                                                std::vector<FeatureSample> samples, std::uint64_t seen_count,
                                                std::mt19937_64 rng);

    friend bool operator==(const EpisodicBuffer&, const EpisodicBuffer&) = default;

private:
    void replace_reservoir(FeatureSample&& sample);
    void replace_class_balanced(FeatureSample&& sample);

    std::size_t capacity_{1};
    ReplacementPolicy policy_{ReplacementPolicy::reservoir};
    std::vector<FeatureSample> samples_{};
    std::uint64_t seen_count_{0};
    std::mt19937_64 rng_{};
};

}  // namespace verse

#endif  // VERSE_EPISODIC_MEMORY_HPP
