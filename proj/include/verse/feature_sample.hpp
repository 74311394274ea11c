#ifndef VERSE_FEATURE_SAMPLE_HPP
#define VERSE_FEATURE_SAMPLE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "verse/network.hpp"

namespace verse {

struct FeatureSample {
    std::vector<double> z;
    int label{0};
    std::uint64_t stream_index{0};
    std::int64_t instance_id{0};
    std::uint32_t frame_index{0};

    friend bool operator==(const FeatureSample&, const FeatureSample&) = default;
};

/// Stacks samples into an n x dim batch. Throws on ragged dimensions.
[[nodiscard]] Batch make_batch(std::span<const FeatureSample> samples);

}  // namespace verse

#endif  // VERSE_FEATURE_SAMPLE_HPP
