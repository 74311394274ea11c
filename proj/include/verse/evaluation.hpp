#ifndef VERSE_EVALUATION_HPP
#define VERSE_EVALUATION_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "verse/learner.hpp"
#include "verse/stream.hpp"

namespace verse {

using ClassSet = std::set<int>;

/// Fraction of argmax-correct predictions over the test samples whose label
/// is in `scope` (all samples when scope is nullopt). Ties go to the lowest
/// class index. Throws if nothing is in scope.
[[nodiscard]] double evaluate(const ParamVector& params, const Dataset& test,
                              const std::optional<ClassSet>& scope = std::nullopt);

struct EvalPoint {
    std::uint64_t t{0};
    ClassSet seen_classes;
    double accuracy{0.0};
    /// Accuracy of the semantic memory, recorded for learners that have one.
    std::optional<double> semantic_accuracy;

    friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

enum class RunStatus { ok, failed };

struct RunRecord {
    std::string learner;
    std::string scheme;
    std::uint64_t seed{0};
    std::vector<EvalPoint> eval_points;
    std::vector<double> offline_refs;  // aligned with eval_points
    std::string config;                // JSON snapshot of the learner config
    RunStatus status{RunStatus::ok};
    std::string error;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Mean over testing events of accuracy / offline accuracy. Not clamped.
[[nodiscard]] double omega_all(std::span<const double> accuracies, std::span<const double> offline_refs);
[[nodiscard]] double omega_all(const RunRecord& record);
/// Mean accuracy over testing events.
[[nodiscard]] double mu_all(std::span<const double> accuracies);
[[nodiscard]] double mu_all(const RunRecord& record);
[[nodiscard]] std::vector<double> accuracies(const RunRecord& record);
[[nodiscard]] std::optional<std::vector<double>> semantic_accuracies(const RunRecord& record);

struct OfflineConfig {
    std::size_t epochs{30};
    double lr{0.05};
    std::size_t batch_size{16};
    std::uint64_t seed{0};
};

/// Multi-epoch shuffled mini-batch SGD on the (optionally class-filtered)
/// training split. Throws on a non-finite loss.
[[nodiscard]] ParamVector train_offline(const Dataset& train, const NetworkShape& shape, const OfflineConfig& cfg,
                                        const std::optional<ClassSet>& classes = std::nullopt);

/// Offline upper-bound accuracies, one model per distinct seen-class set.
/// Thread-safe; shared across the runs of an experiment.
class OfflineReferences {
public:
    OfflineReferences(const Dataset& train, const Dataset& test, NetworkShape shape, OfflineConfig cfg);

    [[nodiscard]] double accuracy(const ClassSet& classes);
    [[nodiscard]] std::size_t models_trained() const;

private:
    const Dataset& train_;
    const Dataset& test_;
    NetworkShape shape_;
    OfflineConfig cfg_;
    mutable std::mutex mutex_;
    std::map<ClassSet, double> cache_;
};

/// 0 means: after every class boundary for class-contiguous schemes, every
/// 50 steps otherwise. Any value > 0 evaluates every that many steps. The
/// last step is always evaluated.
struct EvalCadence {
    std::size_t every{0};
};

[[nodiscard]] std::vector<std::uint64_t> eval_positions(const Dataset& train, const StreamSchedule& schedule,
                                                        const EvalCadence& cadence);

/// Invoked after each step with (t, index of the consumed training sample).
using StepObserver = std::function<void(std::uint64_t, std::size_t)>;

struct RunSetup {
    LearnerConfig learner;
    Scheme scheme{Scheme::class_instance};
    std::uint64_t seed{0};
    EvalCadence cadence{};
};

struct RunOutcome {
    RunRecord record;
    LearnerState final_state;
};

/// Streams the training split once in the scheme's order through one learner,
/// evaluating on seen classes at each cadence point.
[[nodiscard]] RunOutcome run_stream(const Dataset& train, const Dataset& test, const NetworkShape& shape,
                                    const RunSetup& setup, OfflineReferences& offline,
                                    const StepObserver& observer = {});

}  // namespace verse

#endif  // VERSE_EVALUATION_HPP
