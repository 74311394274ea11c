#include "verse/learner.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "verse/error.hpp"
#include "verse/seed.hpp"

namespace verse {

std::string_view to_string(InferenceModel model) {
    return model == InferenceModel::working ? "working" : "semantic";
}

InferenceModel parse_inference_model(std::string_view name) {
    if (name == "working") return InferenceModel::working;
    if (name == "semantic") return InferenceModel::semantic;
    throw Error("unknown inference model '" + std::string(name) + "'");
}

std::string_view to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::verse:
            return "verse";
        case LearnerKind::replay:
            return "replay";
        case LearnerKind::finetune:
            return "finetune";
    }
    return "verse";
}

LearnerKind parse_learner(std::string_view name) {
    if (name == "verse") return LearnerKind::verse;
    if (name == "replay") return LearnerKind::replay;
    if (name == "finetune") return LearnerKind::finetune;
    throw Error("unknown learner '" + std::string(name) + "'");
}

void VerseConfig::validate() const {
    if (!(alpha > 0.0)) throw Error("alpha > 0 required");
    if (!(beta > 0.0)) throw Error("beta > 0 required");
    if (!(lambda_distill >= 0.0)) throw Error("lambda >= 0 required");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("gamma in [0,1] required");
    if (!(accept_rate >= 0.0 && accept_rate <= 1.0)) throw Error("accept_rate in [0,1] required");
    if (replay_count < 1) throw Error("replay_count >= 1 required");
    if (buffer_capacity < 1) throw Error("buffer_capacity >= 1 required");
}

void LearnerConfig::validate() const {
    verse.validate();
    if (!(baseline_lr > 0.0)) throw Error("baseline learning rate > 0 required");
}

LearnerState LearnerState::create(const NetworkShape& shape, const VerseConfig& cfg, std::uint64_t seed) {
    auto theta = ParamVector::initialize(shape, derive_seed(seed, "theta"));
    SemanticMemory sem(theta, cfg.gamma, cfg.accept_rate, derive_seed(seed, "semantic"));
    EpisodicBuffer buffer(cfg.buffer_capacity, cfg.policy, derive_seed(seed, "buffer"));
    return LearnerState{std::move(theta), std::move(sem), std::move(buffer), 0,
                        std::mt19937_64(derive_seed(seed, "replay"))};
}

std::uint64_t LearnerState::checksum() const {
    std::uint64_t h = theta.checksum();
    h = h * 31 + sem.phi().checksum();
    h = h * 31 + buffer.checksum();
    h = h * 31 + step_count;
    return h;
}

namespace {

void check_sample(const ParamVector& theta, const FeatureSample& sample) {
    require_dim("stream sample embedding length", theta.shape().input_dim, sample.z.size());
    if (sample.label < 0 || static_cast<std::size_t>(sample.label) >= theta.shape().num_classes) {
        throw Error("stream sample label " + std::to_string(sample.label) + " outside [0, " +
                    std::to_string(theta.shape().num_classes) + ")");
    }
}

Batch joint_batch(const FeatureSample& sample, const EpisodicBuffer& buffer, std::size_t replay_count,
                  std::mt19937_64& rng) {
    std::vector<FeatureSample> members;
    if (!buffer.empty()) members = buffer.sample_subset(replay_count, rng);
    members.insert(members.begin(), sample);
    return make_batch(members);
}

}  // namespace

ParamVector virtual_update(const ParamVector& theta, const FeatureSample& sample, const EpisodicBuffer& buffer,
                           double alpha, std::size_t replay_count, std::mt19937_64& rng) {
    check_sample(theta, sample);
    const Batch batch = joint_batch(sample, buffer, replay_count, rng);
    return axpy_update(theta, gradient(theta, batch), alpha);
}

std::optional<ParamVector> global_update(const ParamVector& theta, const ParamVector& theta_v,
                                         const SemanticMemory& sem, const EpisodicBuffer& buffer, double beta,
                                         double lambda, std::size_t replay_count, std::mt19937_64& rng) {
    if (buffer.empty()) return std::nullopt;
    const auto distill_samples = buffer.sample_subset(replay_count, rng);
    const auto rehearsal_samples = buffer.sample_subset(replay_count, rng);
    const Batch distill_batch = make_batch(distill_samples);
    const Batch rehearsal = make_batch(rehearsal_samples);
    const Matrix targets = sem.distill_targets(distill_batch.inputs);
    const LossSpec spec{rehearsal, DistillTerm{distill_batch.inputs, targets, lambda}};
    return axpy_update(theta, gradient(theta_v, spec), beta);
}

void process_stream_step(LearnerState& state, const FeatureSample& sample, const VerseConfig& cfg) {
    check_sample(state.theta, sample);
    auto rng = state.replay_rng;

    const ParamVector theta_v = virtual_update(state.theta, sample, state.buffer, cfg.alpha, cfg.replay_count, rng);
    auto updated = global_update(state.theta, theta_v, state.sem, state.buffer, cfg.beta, cfg.lambda_distill,
                                 cfg.replay_count, rng);
    ParamVector theta = updated ? std::move(*updated) : theta_v;
    if (!theta.all_finite()) throw Error("VERSE step produced non-finite parameters");

    state.theta = std::move(theta);
    state.replay_rng = rng;
    state.sem.maybe_update(state.theta);
    state.buffer.insert(sample);
    ++state.step_count;
}

void finetune_step(LearnerState& state, const FeatureSample& sample, double lr) {
    check_sample(state.theta, sample);
    const Batch batch = make_batch(std::span<const FeatureSample>(&sample, 1));
    ParamVector theta = axpy_update(state.theta, gradient(state.theta, batch), lr);
    if (!theta.all_finite()) throw Error("fine-tune step produced non-finite parameters");
    state.theta = std::move(theta);
    ++state.step_count;
}

void replay_step(LearnerState& state, const FeatureSample& sample, double lr, std::size_t replay_count) {
    check_sample(state.theta, sample);
    auto rng = state.replay_rng;
    const Batch batch = joint_batch(sample, state.buffer, replay_count, rng);
    ParamVector theta = axpy_update(state.theta, gradient(state.theta, batch), lr);
    if (!theta.all_finite()) throw Error("replay step produced non-finite parameters");
    state.theta = std::move(theta);
    state.replay_rng = rng;
    state.buffer.insert(sample);
    ++state.step_count;
}

void learner_step(LearnerState& state, const FeatureSample& sample, const LearnerConfig& cfg) {
    switch (cfg.kind) {
        case LearnerKind::verse:
            process_stream_step(state, sample, cfg.verse);
            break;
        case LearnerKind::replay:
            replay_step(state, sample, cfg.baseline_lr, cfg.verse.replay_count);
            break;
        case LearnerKind::finetune:
            finetune_step(state, sample, cfg.baseline_lr);
            break;
    }
}

const ParamVector& inference_params(const LearnerState& state, InferenceModel model) {
    return model == InferenceModel::working ? state.theta : state.sem.phi();
}

namespace {

constexpr int kCheckpointVersion = 1;

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::mt19937_64 rng_from_string(const std::string& text) {
    std::istringstream is(text);
    std::mt19937_64 rng;
    is >> rng;
    if (!is) throw Error("checkpoint: malformed RNG state");
    return rng;
}

nlohmann::json shape_to_json(const NetworkShape& shape) {
    return {{"input_dim", shape.input_dim},
            {"hidden_dims", shape.hidden_dims},
            {"num_classes", shape.num_classes},
            {"activation", to_string(shape.activation)}};
}

NetworkShape shape_from_json(const nlohmann::json& j) {
    NetworkShape shape;
    shape.input_dim = j.at("input_dim").get<std::size_t>();
    shape.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    shape.num_classes = j.at("num_classes").get<std::size_t>();
    shape.activation = parse_activation(j.at("activation").get<std::string>());
    return shape;
}

std::vector<double> values_of(const ParamVector& p) { return {p.values().begin(), p.values().end()}; }

}  // namespace

std::string serialize_checkpoint(const LearnerState& state) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : state.buffer.samples()) {
        samples.push_back({{"z", s.z},
                           {"label", s.label},
                           {"stream_index", s.stream_index},
                           {"instance_id", s.instance_id},
                           {"frame_index", s.frame_index}});
    }
    nlohmann::json j = {
        {"format", "verse-checkpoint"},
        {"version", kCheckpointVersion},
        {"step_count", state.step_count},
        {"shape", shape_to_json(state.theta.shape())},
        {"theta", values_of(state.theta)},
        {"semantic",
         {{"phi", values_of(state.sem.phi())},
          {"gamma", state.sem.gamma()},
          {"accept_rate", state.sem.accept_rate()},
          {"rng", rng_to_string(state.sem.rng())}}},
        {"buffer",
         {{"capacity", state.buffer.capacity()},
          {"policy", to_string(state.buffer.policy())},
          {"seen_count", state.buffer.seen_count()},
          {"rng", rng_to_string(state.buffer.rng())},
          {"samples", std::move(samples)}}},
        {"replay_rng", rng_to_string(state.replay_rng)},
    };
    return j.dump();
}

LearnerState deserialize_checkpoint(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        if (j.at("format") != "verse-checkpoint") throw Error("checkpoint: not a verse checkpoint");
        if (j.at("version") != kCheckpointVersion) {
            throw Error("checkpoint: unsupported version " + j.at("version").dump());
        }
        const NetworkShape shape = shape_from_json(j.at("shape"));
        ParamVector theta(shape, j.at("theta").get<std::vector<double>>());
        const auto& sj = j.at("semantic");
        auto sem = SemanticMemory::restore(ParamVector(shape, sj.at("phi").get<std::vector<double>>()),
                                           sj.at("gamma").get<double>(), sj.at("accept_rate").get<double>(),
                                           rng_from_string(sj.at("rng").get<std::string>()));
        const auto& bj = j.at("buffer");
        std::vector<FeatureSample> samples;
        for (const auto& s : bj.at("samples")) {
            samples.push_back(FeatureSample{s.at("z").get<std::vector<double>>(), s.at("label").get<int>(),
                                            s.at("stream_index").get<std::uint64_t>(),
                                            s.at("instance_id").get<std::int64_t>(),
                                            s.at("frame_index").get<std::uint32_t>()});
        }
        auto buffer = EpisodicBuffer::restore(bj.at("capacity").get<std::size_t>(),
                                              parse_policy(bj.at("policy").get<std::string>()), std::move(samples),
                                              bj.at("seen_count").get<std::uint64_t>(),
                                              rng_from_string(bj.at("rng").get<std::string>()));
        return LearnerState{std::move(theta), std::move(sem), std::move(buffer),
                            j.at("step_count").get<std::uint64_t>(),
                            rng_from_string(j.at("replay_rng").get<std::string>())};
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const LearnerState& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << serialize_checkpoint(state);
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

LearnerState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
}

}  // namespace verse
