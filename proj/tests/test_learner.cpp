#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "verse/error.hpp"
#include "verse/learner.hpp"
#include "verse/stream.hpp"

using namespace verse;

namespace {

const NetworkShape kShape{4, {8}, 3, Activation::tanh};

FeatureSample random_sample(std::mt19937_64& rng, std::uint64_t index) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, 2);
    FeatureSample s;
    for (int k = 0; k < 4; ++k) s.z.push_back(g(rng));
    s.label = label(rng);
    s.stream_index = index;
    s.instance_id = static_cast<std::int64_t>(index);
    return s;
}

EpisodicBuffer filled_buffer(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EpisodicBuffer buffer(64, ReplacementPolicy::reservoir, seed);
    for (std::uint64_t i = 0; i < count; ++i) buffer.insert(random_sample(rng, i));
    return buffer;
}

std::vector<double> flat(const ParamVector& p) { return {p.values().begin(), p.values().end()}; }

oracle::Rows rows_of(const std::vector<FeatureSample>& samples) {
    oracle::Rows r;
    for (const auto& s : samples) r.push_back(s.z);
    return r;
}

std::vector<int> labels_of(const std::vector<FeatureSample>& samples) {
    std::vector<int> l;
    for (const auto& s : samples) l.push_back(s.label);
    return l;
}

void check_close(const ParamVector& got, const std::vector<double>& expected, double tol) {
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(std::abs(got[i] - expected[i]) <= tol * std::max(1.0, std::abs(expected[i])));
    }
}

VerseConfig test_config() {
    VerseConfig cfg;
    cfg.buffer_capacity = 32;
    cfg.replay_count = 5;
    return cfg;
}

}  // namespace

TEST_CASE("virtual update with zero step returns theta bit-exactly") {
    const auto theta = ParamVector::initialize(kShape, 1);
    const auto buffer = filled_buffer(20, 2);
    std::mt19937_64 rng(3);
    std::mt19937_64 data(4);
    CHECK(virtual_update(theta, random_sample(data, 99), buffer, 0.0, 5, rng) == theta);
}

TEST_CASE("virtual update on an empty buffer is one SGD step on the new sample") {
    const auto theta = ParamVector::initialize(kShape, 1);
    EpisodicBuffer empty(8, ReplacementPolicy::reservoir, 1);
    std::mt19937_64 rng(3);
    std::mt19937_64 data(4);
    const auto s = random_sample(data, 0);
    const auto expected = axpy_update(theta, gradient(theta, make_batch(std::span(&s, 1))), 0.005);
    CHECK(virtual_update(theta, s, empty, 0.005, 16, rng) == expected);
}

TEST_CASE("virtual update follows the finite-difference gradient of the joint batch") {
    const auto theta = ParamVector::initialize(kShape, 5);
    const auto buffer = filled_buffer(30, 6);
    std::mt19937_64 data(7);
    const auto s = random_sample(data, 100);
    std::mt19937_64 rng(8);

    auto replay_rng = rng;
    auto members = buffer.sample_subset(5, replay_rng);
    members.insert(members.begin(), s);
    const auto theta_before = theta.checksum();
    const double alpha = 0.05;
    const auto theta_v = virtual_update(theta, s, buffer, alpha, 5, rng);
    CHECK(theta.checksum() == theta_before);
    CHECK(rng == replay_rng);

    oracle::CompositeLoss loss{kShape, rows_of(members), labels_of(members), {}, {}, 0.0};
    const auto g = oracle::finite_difference(loss, flat(theta));
    std::vector<double> expected(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) expected[i] = theta[i] - alpha * g[i];
    check_close(theta_v, expected, 1e-8);
}

TEST_CASE("global update with zero distillation weight is a rehearsal CE step taken at theta_v") {
    const auto theta = ParamVector::initialize(kShape, 10);
    const auto theta_v = ParamVector::initialize(kShape, 11);
    const auto buffer = filled_buffer(40, 12);
    const SemanticMemory sem(ParamVector::initialize(kShape, 13), 0.9, 0.1, 14);
    std::mt19937_64 rng(15);
    auto replay_rng = rng;
    (void)buffer.sample_subset(5, replay_rng);
    const auto rehearsal = buffer.sample_subset(5, replay_rng);

    const auto got = global_update(theta, theta_v, sem, buffer, 0.01, 0.0, 5, rng);
    REQUIRE(got);
    const auto expected = axpy_update(theta, gradient(theta_v, make_batch(rehearsal)), 0.01);
    CHECK(*got == expected);
}

TEST_CASE("global update with zero step leaves theta and skips on an empty buffer") {
    const auto theta = ParamVector::initialize(kShape, 10);
    const auto theta_v = ParamVector::initialize(kShape, 11);
    const SemanticMemory sem(theta, 0.9, 0.1, 14);
    std::mt19937_64 rng(15);
    const auto got = global_update(theta, theta_v, sem, filled_buffer(40, 12), 0.0, 0.3, 5, rng);
    REQUIRE(got);
    CHECK(*got == theta);

    EpisodicBuffer empty(4, ReplacementPolicy::reservoir, 1);
    CHECK_FALSE(global_update(theta, theta_v, sem, empty, 0.01, 0.3, 5, rng).has_value());
}

TEST_CASE("global update follows the finite-difference gradient of the composite loss at theta_v") {
    const auto theta = ParamVector::initialize(kShape, 20);
    const auto theta_v = ParamVector::initialize(kShape, 21);
    const auto buffer = filled_buffer(40, 22);
    const SemanticMemory sem(ParamVector::initialize(kShape, 23), 0.9, 0.1, 24);
    const double beta = 0.05;
    const double lambda = 0.3;
    std::mt19937_64 rng(25);
    auto replay_rng = rng;
    const auto distill = buffer.sample_subset(5, replay_rng);
    const auto rehearsal = buffer.sample_subset(5, replay_rng);
    const auto targets = oracle::forward(kShape, flat(sem.phi()), rows_of(distill));

    const auto got = global_update(theta, theta_v, sem, buffer, beta, lambda, 5, rng);
    REQUIRE(got);

    oracle::CompositeLoss loss{kShape, rows_of(rehearsal), labels_of(rehearsal), rows_of(distill), targets, lambda};
    const auto g = oracle::finite_difference(loss, flat(theta_v));
    std::vector<double> expected(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) expected[i] = theta[i] - beta * g[i];
    check_close(*got, expected, 1e-8);
}

TEST_CASE("first step on an empty buffer stores the sample and takes one CE step") {
    const auto cfg = test_config();
    auto state = LearnerState::create(kShape, cfg, 1);
    const auto theta0 = state.theta;
    std::mt19937_64 data(2);
    const auto s = random_sample(data, 1);
    process_stream_step(state, s, cfg);
    CHECK(state.buffer.size() == 1);
    CHECK(state.buffer.samples()[0] == s);
    CHECK(state.step_count == 1);
    CHECK(state.theta == axpy_update(theta0, gradient(theta0, make_batch(std::span(&s, 1))), cfg.alpha));
}

TEST_CASE("identically seeded runs are bit-identical at every prefix") {
    const auto cfg = test_config();
    auto a = LearnerState::create(kShape, cfg, 7);
    auto b = LearnerState::create(kShape, cfg, 7);
    std::mt19937_64 data(8);
    for (std::uint64_t i = 0; i < 150; ++i) {
        const auto s = random_sample(data, i);
        process_stream_step(a, s, cfg);
        process_stream_step(b, s, cfg);
        REQUIRE(a.checksum() == b.checksum());
    }
    CHECK(a == b);
}

TEST_CASE("a dimension error leaves the learner state untouched") {
    const auto cfg = test_config();
    auto state = LearnerState::create(kShape, cfg, 7);
    std::mt19937_64 data(8);
    for (std::uint64_t i = 0; i < 10; ++i) process_stream_step(state, random_sample(data, i), cfg);
    const auto before = state;
    FeatureSample bad = random_sample(data, 10);
    bad.z.push_back(0.0);
    CHECK_THROWS_AS(process_stream_step(state, bad, cfg), DimensionError);
    CHECK(state == before);
    FeatureSample bad_label = random_sample(data, 10);
    bad_label.label = 3;
    CHECK_THROWS_AS(process_stream_step(state, bad_label, cfg), Error);
    CHECK_THROWS_AS(replay_step(state, bad, 0.01, 4), DimensionError);
    CHECK_THROWS_AS(finetune_step(state, bad, 0.01), DimensionError);
    CHECK(state == before);
}

TEST_CASE("held-out loss falls along a separable iid stream") {
    // Two well-separated Gaussian blobs in 4-d.
    const NetworkShape shape{4, {8}, 2, Activation::tanh};
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 0.3);
    auto draw = [&](int label) {
        FeatureSample s;
        for (int k = 0; k < 4; ++k) s.z.push_back((label == 0 ? 1.0 : -1.0) + g(rng));
        s.label = label;
        return s;
    };
    std::vector<FeatureSample> held_out;
    for (int i = 0; i < 40; ++i) held_out.push_back(draw(i % 2));
    const Batch held = make_batch(held_out);

    VerseConfig cfg;
    auto state = LearnerState::create(shape, cfg, 5);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<double> losses;
    for (int t = 0; t < 200; ++t) {
        process_stream_step(state, draw(coin(rng)), cfg);
        losses.push_back(cross_entropy(forward(state.theta, held.inputs), held.labels));
    }
    double first = 0.0;
    double last = 0.0;
    for (int i = 0; i < 10; ++i) {
        first += losses[static_cast<std::size_t>(i)];
        last += losses[losses.size() - 1 - static_cast<std::size_t>(i)];
    }
    CHECK(last < first);
}

TEST_CASE("virtual step shrinks as the model settles on a stationary stream") {
    const NetworkShape shape{4, {8}, 2, Activation::tanh};
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g(0.0, 0.3);
    std::uniform_int_distribution<int> coin(0, 1);
    VerseConfig cfg;
    auto state = LearnerState::create(shape, cfg, 6);
    std::vector<double> norms;
    for (int t = 0; t < 400; ++t) {
        FeatureSample s;
        s.label = coin(rng);
        for (int k = 0; k < 4; ++k) s.z.push_back((s.label == 0 ? 1.0 : -1.0) + g(rng));
        auto probe_rng = state.replay_rng;
        const auto theta_v = virtual_update(state.theta, s, state.buffer, cfg.alpha, cfg.replay_count, probe_rng);
        double n = 0.0;
        for (std::size_t i = 0; i < theta_v.size(); ++i) n += (theta_v[i] - state.theta[i]) * (theta_v[i] - state.theta[i]);
        norms.push_back(std::sqrt(n));
        process_stream_step(state, s, cfg);
    }
    double early = 0.0;
    double late = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        early += norms[i];
        late += norms[norms.size() - 1 - i];
    }
    CHECK(late < early);
}

TEST_CASE("fine-tune baseline") {
    const auto cfg = test_config();
    std::mt19937_64 data(3);
    const auto s = random_sample(data, 0);

    auto state = LearnerState::create(kShape, cfg, 1);
    const auto before = state;
    finetune_step(state, s, 0.0);
    CHECK(state.theta == before.theta);
    CHECK(state.buffer.empty());
    CHECK(state.sem == before.sem);

    auto ft = LearnerState::create(kShape, cfg, 1);
    auto verse_state = LearnerState::create(kShape, cfg, 1);
    VerseConfig reduced = cfg;
    reduced.alpha = 0.02;
    reduced.beta = 0.0;
    finetune_step(ft, s, 0.02);
    process_stream_step(verse_state, s, reduced);
    CHECK(ft.theta == verse_state.theta);
}

TEST_CASE("replay baseline") {
    const auto cfg = test_config();
    std::mt19937_64 data(3);
    const auto s = random_sample(data, 0);

    auto replay = LearnerState::create(kShape, cfg, 1);
    auto ft = LearnerState::create(kShape, cfg, 1);
    replay_step(replay, s, 0.01, 16);
    finetune_step(ft, s, 0.01);
    CHECK(replay.theta == ft.theta);
    CHECK(replay.buffer.size() == 1);

    // With C >= |M| the batch is the new sample plus the whole buffer.
    for (std::uint64_t i = 1; i < 6; ++i) replay_step(replay, random_sample(data, i), 0.01, 16);
    const auto theta = replay.theta;
    std::vector<FeatureSample> members{random_sample(data, 6)};
    const auto next = members.front();
    members.insert(members.end(), replay.buffer.samples().begin(), replay.buffer.samples().end());
    replay_step(replay, next, 0.01, 16);
    CHECK(replay.theta == axpy_update(theta, gradient(theta, make_batch(members)), 0.01));
}

TEST_CASE("evaluation reads between steps do not perturb the run") {
    const auto cfg = test_config();
    auto quiet = LearnerState::create(kShape, cfg, 9);
    auto probed = LearnerState::create(kShape, cfg, 9);
    std::mt19937_64 data(10);
    std::mt19937_64 probe_data(11);
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto s = random_sample(data, i);
        process_stream_step(quiet, s, cfg);
        process_stream_step(probed, s, cfg);
        const Batch probe = make_batch(std::vector{random_sample(probe_data, i), random_sample(probe_data, i)});
        (void)predict(inference_params(probed, InferenceModel::working), probe.inputs);
        (void)predict(inference_params(probed, InferenceModel::semantic), probe.inputs);
        (void)probed.sem.distill_targets(probe.inputs);
    }
    CHECK(quiet == probed);
}

TEST_CASE("checkpoint round trip resumes bit-exactly") {
    auto cfg = test_config();
    cfg.accept_rate = 0.5;
    for (auto policy : {ReplacementPolicy::reservoir, ReplacementPolicy::class_balanced}) {
        cfg.policy = policy;
        auto straight = LearnerState::create(kShape, cfg, 12);
        std::mt19937_64 data(13);
        std::vector<FeatureSample> stream;
        for (std::uint64_t i = 0; i < 120; ++i) stream.push_back(random_sample(data, i));

        for (std::size_t i = 0; i < 60; ++i) process_stream_step(straight, stream[i], cfg);
        const std::string blob = serialize_checkpoint(straight);
        auto resumed = deserialize_checkpoint(blob);
        CHECK(resumed == straight);
        for (std::size_t i = 60; i < stream.size(); ++i) {
            process_stream_step(straight, stream[i], cfg);
            process_stream_step(resumed, stream[i], cfg);
        }
        CHECK(resumed == straight);
        CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(straight));
    }

    auto path = std::filesystem::temp_directory_path() / "verse_checkpoint_test.json";
    const auto state = LearnerState::create(kShape, cfg, 3);
    save_checkpoint(state, path);
    CHECK(load_checkpoint(path) == state);

    CHECK_THROWS_AS((void)deserialize_checkpoint("{}"), Error);
    CHECK_THROWS_AS((void)deserialize_checkpoint("not json"), Error);
}

TEST_CASE("config validation") {
    VerseConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.accept_rate = 1.5;
    CHECK_THROWS_WITH_AS(cfg.validate(), "accept_rate in [0,1] required", Error);
    cfg = {};
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.lambda_distill = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.replay_count = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK_THROWS_AS((void)parse_learner("ewc"), Error);
}
