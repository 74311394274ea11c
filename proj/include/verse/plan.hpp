#ifndef VERSE_PLAN_HPP
#define VERSE_PLAN_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "verse/experiment.hpp"

namespace CLI {
class App;
}

namespace verse {

/// Raw option values as they come from a config file and flags, before
/// validation. Defaults here are the documented plan defaults.
struct PlanOptions {
    // dataset
    std::size_t classes{10};
    std::size_t instances{4};
    std::size_t frames{60};
    std::size_t raw_dim{32};
    double separation{1.5};
    double instance_spread{1.5};
    double temporal_step{0.15};
    double noise{0.3};
    double test_fraction{0.2};
    std::string train_file;
    std::string test_file;

    // model
    std::string extractor{"projection"};
    std::size_t embed_dim{32};
    std::vector<std::size_t> hidden{32, 32};
    std::string activation{"relu"};

    // grid
    std::vector<std::string> schemes{"class_instance"};
    std::vector<std::string> learners{"verse"};
    std::uint64_t seed{0};
    std::size_t runs{1};
    std::size_t eval_every{0};

    // learners
    double alpha{0.005};
    double beta{0.01};
    double lambda{0.3};
    double gamma{0.9};
    double accept_rate{0.4};
    std::size_t replay_count{16};
    std::size_t buffer_capacity{200};
    std::string policy{"auto"};
    std::string inference_model{"working"};
    double baseline_lr{0.01};

    // offline upper bound
    std::size_t offline_epochs{30};
    double offline_lr{0.05};
    std::size_t offline_batch{16};

    std::string out{"verse_out"};
    std::size_t workers{1};
    bool dry_run{false};
};

/// Registers `--config <file>` plus every plan key on `app`. Config-file keys
/// use the flag names without dashes (`accept-rate = 0.4`); flags override
/// the file; unknown keys are rejected.
void add_plan_options(CLI::App& app, PlanOptions& options);

/// Validates ranges and converts names; throws verse::Error naming the constraint.
[[nodiscard]] ExperimentPlan resolve_plan(const PlanOptions& options);

/// Parses command-line style arguments (without the program name) into a plan.
[[nodiscard]] ExperimentPlan parse_plan(const std::vector<std::string>& args);

[[nodiscard]] std::string plan_to_json(const ExperimentPlan& plan);

enum class AblationAxis { buffer_capacity, lambda, accept_rate, ema_on_off, replacement_policy };

[[nodiscard]] AblationAxis parse_axis(std::string_view name);
[[nodiscard]] std::string_view to_string(AblationAxis axis);

/// Copy of `base` with the axis set to `value`. ema_on_off takes on/off, where
/// off freezes the semantic memory (accept_rate = 0) and keeps lambda.
[[nodiscard]] ExperimentPlan apply_axis(const ExperimentPlan& base, AblationAxis axis, const std::string& value);

/// Writes the resolved grid to `out` without training.
void print_dry_run(const ExperimentPlan& plan, std::ostream& out);

// Subcommands. Each returns the process exit code.
int cmd_generate(const ExperimentPlan& plan, std::ostream& out, std::ostream& err);
int cmd_run(const ExperimentPlan& plan, bool dry_run, std::ostream& out, std::ostream& err);
int cmd_ablate(const ExperimentPlan& plan, AblationAxis axis, const std::vector<std::string>& values, bool dry_run,
               std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

}  // namespace verse

#endif  // VERSE_PLAN_HPP
