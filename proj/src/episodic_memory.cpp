#include "verse/episodic_memory.hpp"

#include <algorithm>
#include <bit>
#include <iterator>
#include <numeric>

#include "verse/error.hpp"

namespace verse {

std::string_view to_string(ReplacementPolicy policy) {
    return policy == ReplacementPolicy::reservoir ? "reservoir" : "class_balanced";
}

ReplacementPolicy parse_policy(std::string_view name) {
    if (name == "reservoir") return ReplacementPolicy::reservoir;
    if (name == "class_balanced") return ReplacementPolicy::class_balanced;
    throw Error("unknown replacement policy '" + std::string(name) + "'");
}

EpisodicBuffer::EpisodicBuffer(std::size_t capacity, ReplacementPolicy policy, std::uint64_t seed)
    : capacity_(capacity), policy_(policy), rng_(seed) {
    if (capacity == 0) throw Error("episodic buffer capacity must be >= 1");
    samples_.reserve(capacity);
}

EpisodicBuffer EpisodicBuffer::restore(std::size_t capacity, ReplacementPolicy policy,
                                       std::vector<FeatureSample> samples, std::uint64_t seen_count,
                                       std::mt19937_64 rng) {
    if (capacity == 0) throw Error("episodic buffer capacity must be >= 1");
    if (samples.size() != std::min<std::uint64_t>(seen_count, capacity)) {
        throw Error("episodic buffer checkpoint: sample count inconsistent with seen_count");
    }
    EpisodicBuffer b;
    b.capacity_ = capacity;
    b.policy_ = policy;
    b.samples_ = std::move(samples);
    b.seen_count_ = seen_count;
    b.rng_ = rng;
    return b;
}

void EpisodicBuffer::insert(FeatureSample sample) {
    ++seen_count_;
    if (samples_.size() < capacity_) {
        samples_.push_back(std::move(sample));
        return;
    }
    if (policy_ == ReplacementPolicy::reservoir) {
        replace_reservoir(std::move(sample));
    } else {
        replace_class_balanced(std::move(sample));
    }
}

void EpisodicBuffer::replace_reservoir(FeatureSample&& sample) {
    std::uniform_int_distribution<std::uint64_t> pick(0, seen_count_ - 1);
    const std::uint64_t j = pick(rng_);
    if (j < capacity_) {
        samples_[static_cast<std::size_t>(j)] = std::move(sample);
    }
}

void EpisodicBuffer::replace_class_balanced(FeatureSample&& sample) {
    const auto histogram = class_histogram();
    std::size_t largest = 0;
    for (const auto& [label, count] : histogram) largest = std::max(largest, count);
    std::vector<int> tied;
    for (const auto& [label, count] : histogram) {
        if (count == largest) tied.push_back(label);
    }
    std::uniform_int_distribution<std::size_t> pick_class(0, tied.size() - 1);
    const int victim_class = tied[pick_class(rng_)];

    std::uniform_int_distribution<std::size_t> pick_member(0, largest - 1);
    std::size_t nth = pick_member(rng_);
    for (auto& resident : samples_) {
        if (resident.label == victim_class && nth-- == 0) {
            resident = std::move(sample);
            return;
        }
    }
}

std::vector<FeatureSample> EpisodicBuffer::sample_subset(std::size_t count, std::mt19937_64& rng) const {
    std::vector<FeatureSample> out;
    const std::size_t n = std::min(count, samples_.size());
    if (n == samples_.size()) return samples_;
    out.reserve(n);
    std::sample(samples_.begin(), samples_.end(), std::back_inserter(out), n, rng);
    return out;
}

std::map<int, std::size_t> EpisodicBuffer::class_histogram() const {
    std::map<int, std::size_t> counts;
    for (const auto& s : samples_) ++counts[s.label];
    return counts;
}

std::uint64_t EpisodicBuffer::checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    mix(capacity_);
    mix(seen_count_);
    for (const auto& s : samples_) {
        mix(static_cast<std::uint64_t>(s.label));
        mix(s.stream_index);
        mix(static_cast<std::uint64_t>(s.instance_id));
        mix(s.frame_index);
        for (double v : s.z) mix(std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

}  // namespace verse
