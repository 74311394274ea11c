#ifndef VERSE_EXPERIMENT_HPP
#define VERSE_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "verse/evaluation.hpp"

namespace verse {

struct FeatureFiles {
    std::filesystem::path train;
    std::filesystem::path test;
};

/// A fully resolved experiment grid: learners x schemes x seeds over one dataset.
struct ExperimentPlan {
    SyntheticConfig synthetic{};
    std::optional<FeatureFiles> feature_files;  // replaces the synthetic source when set

    ExtractorKind extractor{ExtractorKind::random_projection};
    std::size_t embed_dim{32};
    std::vector<std::size_t> hidden_dims{32, 32};
    Activation activation{Activation::relu};

    std::vector<Scheme> schemes{Scheme::class_instance};
    std::vector<LearnerKind> learners{LearnerKind::verse};
    LearnerConfig learner{};
    /// When unset the policy follows the scheme (reservoir for temporally
    /// ordered streams, class-balanced otherwise).
    std::optional<ReplacementPolicy> policy;

    std::uint64_t master_seed{0};
    std::size_t runs{1};
    EvalCadence cadence{};
    OfflineConfig offline{};

    std::filesystem::path output_dir{"verse_out"};
    std::size_t workers{1};

    void validate() const;
    [[nodiscard]] std::vector<std::uint64_t> run_seeds() const;
    [[nodiscard]] std::uint64_t dataset_seed() const;
};

struct LoadedData {
    Dataset train;  // embedded
    Dataset test;   // embedded
    NetworkShape shape;
};

/// Materializes the plan's dataset (generated or ingested) and embeds it.
[[nodiscard]] LoadedData load_data(const ExperimentPlan& plan);

struct GridCell {
    LearnerKind learner;
    Scheme scheme;
    std::uint64_t seed;
};

/// Grid in output order: learner-major, then scheme, then seed.
[[nodiscard]] std::vector<GridCell> expand_grid(const ExperimentPlan& plan);

/// Runs every grid cell. Failed cells are recorded with status failed and
/// the grid continues. Record order is independent of the worker count.
[[nodiscard]] std::vector<RunRecord> run_experiment(const ExperimentPlan& plan, const LoadedData& data);
[[nodiscard]] std::vector<RunRecord> run_experiment(const ExperimentPlan& plan);

// Persistence: eval_points.jsonl holds one line per evaluation point with
// fields learner, scheme, seed, t, seen_classes, accuracy, offline_accuracy,
// semantic_accuracy (in that order); summary.jsonl one line per run.
[[nodiscard]] std::string eval_point_line(const RunRecord& record, std::size_t index);
[[nodiscard]] std::string summary_line(const RunRecord& record);
void write_records(const std::vector<RunRecord>& records, const std::filesystem::path& dir);
[[nodiscard]] std::vector<RunRecord> read_records(const std::filesystem::path& dir);

struct GroupSummary {
    std::string learner;
    std::string scheme;
    std::size_t runs{0};
    std::size_t failed{0};
    double mean_mu{0.0};
    double median_mu{0.0};
    /// Over the runs whose offline references are all positive; unset if none are.
    std::optional<double> mean_omega;
    std::optional<double> median_omega;
};

/// Mean and median of mu_all / omega_all per (learner, scheme) over successful runs.
[[nodiscard]] std::vector<GroupSummary> summarize(const std::vector<RunRecord>& records);

[[nodiscard]] double median(std::vector<double> values);

/// omega_all, or nullopt when an offline reference is zero and the ratio is undefined.
[[nodiscard]] std::optional<double> defined_omega(std::span<const double> accuracies,
                                                  std::span<const double> offline_refs);

void print_run_table(const std::vector<RunRecord>& records, std::ostream& out);
void print_group_table(const std::vector<GroupSummary>& groups, std::ostream& out);

}  // namespace verse

#endif  // VERSE_EXPERIMENT_HPP
