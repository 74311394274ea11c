#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "verse/error.hpp"
#include "verse/semantic_memory.hpp"

using namespace verse;

namespace {

const NetworkShape kShape{3, {4}, 2};

ParamVector one_param(double v) { return ParamVector(NetworkShape{1, {}, 2}, {v, v, v, v}); }

}  // namespace

TEST_CASE("accept rate zero never changes phi") {
    const auto theta0 = ParamVector::initialize(kShape, 1);
    SemanticMemory sem(theta0, 0.9, 0.0, 2);
    const auto other = ParamVector::initialize(kShape, 3);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(sem.maybe_update(other));
    CHECK(sem.phi() == theta0);
}

TEST_CASE("accept rate one with gamma zero copies theta") {
    SemanticMemory sem(ParamVector::initialize(kShape, 1), 0.0, 1.0, 2);
    const auto theta = ParamVector::initialize(kShape, 3);
    CHECK(sem.maybe_update(theta));
    CHECK(sem.phi() == theta);
}

TEST_CASE("gamma one keeps phi") {
    const auto theta0 = ParamVector::initialize(kShape, 1);
    SemanticMemory sem(theta0, 1.0, 1.0, 2);
    CHECK(sem.maybe_update(ParamVector::initialize(kShape, 3)));
    CHECK(sem.phi() == theta0);
}

TEST_CASE("ema arithmetic") {
    SemanticMemory sem(one_param(1.0), 0.9, 1.0, 2);
    sem.maybe_update(one_param(0.0));
    for (double v : sem.phi().values()) CHECK(v == 0.9);
}

TEST_CASE("updated phi stays between old phi and theta") {
    SemanticMemory sem(ParamVector::initialize(kShape, 1), 0.7, 0.5, 4);
    for (std::uint64_t step = 0; step < 200; ++step) {
        const auto theta = ParamVector::initialize(kShape, 100 + step);
        const auto old = sem.phi();
        const auto theta_sum = theta.checksum();
        sem.maybe_update(theta);
        CHECK(theta.checksum() == theta_sum);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double lo = std::min(old[i], theta[i]);
            const double hi = std::max(old[i], theta[i]);
            CHECK(sem.phi()[i] >= lo);
            CHECK(sem.phi()[i] <= hi);
        }
    }
}

TEST_CASE("update frequency matches the accept rate") {
    SemanticMemory sem(ParamVector::initialize(kShape, 1), 0.9, 0.4, 31337);
    const auto theta = ParamVector::initialize(kShape, 2);
    int updates = 0;
    for (int i = 0; i < 10000; ++i) updates += sem.maybe_update(theta) ? 1 : 0;
    CHECK(std::abs(updates / 10000.0 - 0.4) <= 0.015);
}

TEST_CASE("distillation targets") {
    const auto theta = ParamVector::initialize(kShape, 1);
    std::mt19937_64 rng(6);
    const Matrix x = oracle::random_matrix(5, 3, rng);

    SemanticMemory sem(theta, 0.9, 0.0, 2);
    CHECK(sem.distill_targets(x) == forward(theta, x));
    for (int i = 0; i < 20; ++i) sem.maybe_update(ParamVector::initialize(kShape, 50 + i));
    CHECK(sem.distill_targets(x) == forward(theta, x));

    const auto phi = ParamVector::initialize(kShape, 77);
    const SemanticMemory seeded(phi, 0.9, 0.1, 3);
    const auto expected =
        oracle::forward(kShape, std::vector<double>(phi.values().begin(), phi.values().end()), oracle::rows_of(x));
    const Matrix got = seeded.distill_targets(x);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(got(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) ==
                  doctest::Approx(expected[i][k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("invalid hyperparameters and shapes are rejected") {
    const auto theta = ParamVector::initialize(kShape, 1);
    CHECK_THROWS_AS(SemanticMemory(theta, 1.5, 0.1, 1), Error);
    CHECK_THROWS_AS(SemanticMemory(theta, 0.9, -0.1, 1), Error);
    SemanticMemory sem(theta, 0.9, 1.0, 1);
    CHECK_THROWS_AS(sem.maybe_update(ParamVector::initialize(NetworkShape{3, {5}, 2}, 1)), DimensionError);
}
