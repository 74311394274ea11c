#include "verse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "verse/error.hpp"
#include "verse/seed.hpp"

namespace verse {

double evaluate(const ParamVector& params, const Dataset& test, const std::optional<ClassSet>& scope) {
    std::vector<FeatureSample> selected;
    for (const auto& s : test.samples) {
        if (!scope || scope->contains(s.label)) selected.push_back(s);
    }
    if (selected.empty()) throw Error("evaluate: no test samples in scope");
    const Batch batch = make_batch(selected);
    const auto predictions = predict(params, batch.inputs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == batch.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double omega_all(std::span<const double> accuracies, std::span<const double> offline_refs) {
    if (accuracies.empty()) throw Error("omega_all: no evaluation points");
    require_dim("omega_all: offline reference count", accuracies.size(), offline_refs.size());
    double total = 0.0;
    for (std::size_t t = 0; t < accuracies.size(); ++t) {
        if (!(offline_refs[t] > 0.0)) {
            throw Error("omega_all: offline accuracy at testing event " + std::to_string(t) + " is not positive");
        }
        total += accuracies[t] / offline_refs[t];
    }
    return total / static_cast<double>(accuracies.size());
}

double mu_all(std::span<const double> accuracies) {
    if (accuracies.empty()) throw Error("mu_all: no evaluation points");
    return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
}

std::vector<double> accuracies(const RunRecord& record) {
    std::vector<double> out;
    out.reserve(record.eval_points.size());
    for (const auto& p : record.eval_points) out.push_back(p.accuracy);
    return out;
}

std::optional<std::vector<double>> semantic_accuracies(const RunRecord& record) {
    std::vector<double> out;
    for (const auto& p : record.eval_points) {
        if (!p.semantic_accuracy) return std::nullopt;
        out.push_back(*p.semantic_accuracy);
    }
    if (out.empty()) return std::nullopt;
    return out;
}

double omega_all(const RunRecord& record) { return omega_all(accuracies(record), record.offline_refs); }

double mu_all(const RunRecord& record) { return mu_all(accuracies(record)); }

ParamVector train_offline(const Dataset& train, const NetworkShape& shape, const OfflineConfig& cfg,
                          const std::optional<ClassSet>& classes) {
    std::vector<FeatureSample> pool;
    for (const auto& s : train.samples) {
        if (!classes || classes->contains(s.label)) pool.push_back(s);
    }
    if (pool.empty()) throw Error("train_offline: no training samples");
    if (cfg.batch_size == 0) throw Error("train_offline: batch_size must be >= 1");

    std::mt19937_64 rng(cfg.seed);
    ParamVector params = ParamVector::initialize(shape, derive_seed(cfg.seed, "init"));
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<FeatureSample> members;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            members.clear();
            for (std::size_t i = start; i < end; ++i) members.push_back(pool[order[i]]);
            const Batch batch = make_batch(members);
            const double value = cross_entropy(forward(params, batch.inputs), batch.labels);
            if (!std::isfinite(value)) {
                throw Error("train_offline: non-finite loss in epoch " + std::to_string(epoch));
            }
            params = axpy_update(params, gradient(params, batch), cfg.lr);
        }
    }
    return params;
}

OfflineReferences::OfflineReferences(const Dataset& train, const Dataset& test, NetworkShape shape,
                                     OfflineConfig cfg)
    : train_(train), test_(test), shape_(std::move(shape)), cfg_(cfg) {}

double OfflineReferences::accuracy(const ClassSet& classes) {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(classes); it != cache_.end()) return it->second;
    const auto params = train_offline(train_, shape_, cfg_, classes);
    const double acc = evaluate(params, test_, classes);
    cache_.emplace(classes, acc);
    return acc;
}

std::size_t OfflineReferences::models_trained() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::vector<std::uint64_t> eval_positions(const Dataset& train, const StreamSchedule& schedule,
                                          const EvalCadence& cadence) {
    const auto& order = schedule.order;
    std::vector<std::uint64_t> positions;
    if (order.empty()) return positions;
    if (cadence.every == 0 && is_class_contiguous(schedule.scheme)) {
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            if (train.samples[order[i]].label != train.samples[order[i + 1]].label) positions.push_back(i + 1);
        }
    } else {
        const std::size_t every = cadence.every == 0 ? 50 : cadence.every;
        for (std::size_t t = every; t < order.size(); t += every) positions.push_back(t);
    }
    positions.push_back(order.size());
    return positions;
}

namespace {

std::string config_snapshot(const LearnerConfig& cfg) {
    nlohmann::ordered_json j;
    j["learner"] = to_string(cfg.kind);
    if (cfg.kind == LearnerKind::verse) {
        j["alpha"] = cfg.verse.alpha;
        j["beta"] = cfg.verse.beta;
        j["lambda"] = cfg.verse.lambda_distill;
        j["gamma"] = cfg.verse.gamma;
        j["accept_rate"] = cfg.verse.accept_rate;
        j["inference_model"] = to_string(cfg.verse.inference_model);
    } else {
        j["lr"] = cfg.baseline_lr;
    }
    if (cfg.kind != LearnerKind::finetune) {
        j["replay_count"] = cfg.verse.replay_count;
        j["buffer_capacity"] = cfg.verse.buffer_capacity;
        j["policy"] = to_string(cfg.verse.policy);
    }
    return j.dump();
}

}  // namespace

RunOutcome run_stream(const Dataset& train, const Dataset& test, const NetworkShape& shape, const RunSetup& setup,
                      OfflineReferences& offline, const StepObserver& observer) {
    setup.learner.validate();
    const auto schedule = make_schedule(train, setup.scheme, derive_seed(setup.seed, "schedule"));
    const auto positions = eval_positions(train, schedule, setup.cadence);

    RunRecord record;
    record.learner = std::string(to_string(setup.learner.kind));
    record.scheme = std::string(to_string(setup.scheme));
    record.seed = setup.seed;
    record.config = config_snapshot(setup.learner);

    auto state = LearnerState::create(shape, setup.learner.verse, derive_seed(setup.seed, "learner"));
    const bool has_semantic = setup.learner.kind == LearnerKind::verse;
    const auto inference = has_semantic ? setup.learner.verse.inference_model : InferenceModel::working;

    ClassSet seen;
    std::size_t next_eval = 0;
    for (std::size_t i = 0; i < schedule.order.size(); ++i) {
        FeatureSample sample = train.samples[schedule.order[i]];
        sample.stream_index = i + 1;
        seen.insert(sample.label);
        learner_step(state, sample, setup.learner);
        if (observer) observer(state.step_count, schedule.order[i]);

        if (next_eval < positions.size() && positions[next_eval] == i + 1) {
            ++next_eval;
            EvalPoint point;
            point.t = i + 1;
            point.seen_classes = seen;
            point.accuracy = evaluate(inference_params(state, inference), test, seen);
            if (has_semantic) point.semantic_accuracy = evaluate(state.sem.phi(), test, seen);
            record.offline_refs.push_back(offline.accuracy(seen));
            record.eval_points.push_back(std::move(point));
        }
    }
    return RunOutcome{std::move(record), std::move(state)};
}

}  // namespace verse
