#ifndef VERSE_STREAM_HPP
#define VERSE_STREAM_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "verse/feature_sample.hpp"

namespace verse {

enum class Split { train, test };

[[nodiscard]] std::string_view to_string(Split split);

/// One split of a labelled feature dataset. Samples of an instance carry
/// consecutive frame indices starting at 0.
struct Dataset {
    std::vector<FeatureSample> samples;
    std::size_t num_classes{0};
    std::size_t dim{0};
    Split split{Split::train};

    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

struct SyntheticConfig {
    std::size_t num_classes{10};
    std::size_t instances_per_class{4};
    std::size_t frames_per_instance{60};
    std::size_t raw_dim{32};
    double class_separation{1.5};
    /// Typical distance of an instance anchor from its class mean.
    double instance_spread{1.5};
    /// Length of each random-walk step between consecutive frames.
    double temporal_step{0.15};
    /// Typical norm of the per-frame observation noise.
    double noise_scale{0.3};
    double test_fraction{0.2};
    std::uint64_t seed{0};

    void validate() const;
};

/// Temporally correlated synthetic sequences: every class has a random mean,
/// every instance a random anchor near it, and its frames follow a random
/// walk of fixed step length from the anchor plus observation noise. Whole
/// instances are assigned to train or test (test_fraction per class, at
/// least one instance on each side).
[[nodiscard]] TrainTestSplit generate_synthetic(const SyntheticConfig& cfg);

enum class Scheme { iid, class_iid, instance, class_instance };

[[nodiscard]] std::string_view to_string(Scheme scheme);
[[nodiscard]] Scheme parse_scheme(std::string_view name);
[[nodiscard]] bool is_class_contiguous(Scheme scheme);
/// Reservoir for temporally ordered schemes, class-balanced for shuffled ones.
[[nodiscard]] std::string_view default_policy_name(Scheme scheme);

struct StreamSchedule {
    std::vector<std::size_t> order;  // indices into the train samples, a permutation
    Scheme scheme{Scheme::iid};
    std::uint64_t seed{0};
};

[[nodiscard]] StreamSchedule make_schedule(const Dataset& train, Scheme scheme, std::uint64_t seed);

struct FeatureFormat {
    char delimiter{','};
};

/// Text feature file: a header line `#verse-features dim=<d> classes=<K> split=<train|test>`
/// then one row per sample: instance_id, frame_index, label, d feature values.
/// Values are written in shortest round-trip form, so export/ingest is bit-exact.
[[nodiscard]] Dataset ingest_features(const std::filesystem::path& path, const FeatureFormat& format = {});
void export_features(const Dataset& dataset, const std::filesystem::path& path, const FeatureFormat& format = {});

/// Applies the frozen extractor to every sample, returning a dataset of embeddings.
[[nodiscard]] Dataset embed(const Dataset& raw, const FrozenExtractor& extractor);

}  // namespace verse

#endif  // VERSE_STREAM_HPP
