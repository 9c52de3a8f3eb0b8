#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "espark/net.hpp"
#include "espark/trainer.hpp"

using namespace espark;

namespace {

TransitionBatch toy_batch(SeededRng& rng, int obs_dim, int actions, int size) {
    TransitionBatch batch;
    batch.features.resize(obs_dim, size);
    for (int c = 0; c < size; ++c)
        for (int r = 0; r < obs_dim; ++r) batch.features(r, c) = rng.uniform(-1.0, 1.0);
    batch.allow = Eigen::MatrixXd::Ones(actions, size);
    batch.actions.resize(static_cast<std::size_t>(size));
    batch.old_log_probs.resize(size);
    batch.advantages.resize(size);
    batch.returns.resize(size);
    for (int c = 0; c < size; ++c) {
        // leave one masked action per sample to exercise the
        // masked-softmax path
        batch.allow(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(actions))), c) = 0.0;
        int action;
        do {
            action = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(actions)));
        } while (batch.allow(action, c) == 0.0);
        batch.actions[static_cast<std::size_t>(c)] = action;
        batch.old_log_probs(c) = rng.uniform(-2.0, -0.2);
        batch.advantages(c) = rng.uniform(-1.5, 1.5);
        batch.returns(c) = rng.uniform(-1.0, 1.0);
    }
    return batch;
}

}  // namespace

TEST_CASE("zero weights give a uniform policy and zero value") {
    PolicyParams params(5, 4);
    Eigen::VectorXd features = Eigen::VectorXd::Constant(5, 0.3);
    auto [dist, value] = forward(params, features);
    for (double p : dist.probs) CHECK(p == doctest::Approx(0.25));
    CHECK(value == 0.0);
}

TEST_CASE("forward is deterministic in the observation") {
    SeededRng rng(3, 0);
    PolicyParams params = PolicyParams::xavier_init(6, 3, rng);
    Eigen::VectorXd features = Eigen::VectorXd::LinSpaced(6, -0.5, 0.5);
    auto a = forward(params, features);
    auto b = forward(params, features);
    CHECK(a.first.probs == b.first.probs);
    CHECK(a.second == b.second);
}

TEST_CASE("critic responds linearly to small weight perturbations") {
    SeededRng rng(4, 0);
    PolicyParams params = PolicyParams::xavier_init(3, 2, rng, 8);
    Eigen::VectorXd features = Eigen::VectorXd::Constant(3, 0.4);
    const double delta = 1e-6;
    const double before = forward(params, features).second;
    PolicyParams shifted = params;
    const Eigen::Index idx = shifted.size() - 5;
    shifted.flat()(idx) += delta;
    const double after = forward(shifted, features).second;
    shifted.flat()(idx) += delta;
    const double after2 = forward(shifted, features).second;
    // second difference of a locally-linear response is near zero
    CHECK(std::abs((after2 - after) - (after - before)) < 1e-9);
}

TEST_CASE("flat layout round-trips through layer views") {
    SeededRng rng(5, 0);
    PolicyParams params = PolicyParams::xavier_init(4, 3, rng, 8);
    PolicyParams copy = params;
    const double original = copy.weight(0, 1)(2, 3);
    copy.weight(0, 1)(2, 3) = original + 1.0;
    CHECK(copy.flat() != params.flat());
    copy.weight(0, 1)(2, 3) = original;
    CHECK(copy.flat() == params.flat());
}

TEST_CASE("checkpoint files round-trip and validate the config hash") {
    SeededRng rng(6, 0);
    PolicyParams params = PolicyParams::xavier_init(7, 5, rng);
    const std::string path = "test_params_tmp.bin";
    save_params(path, params, 0xabcdefULL);
    PolicyParams loaded = load_params(path, 0xabcdefULL);
    CHECK(loaded.flat() == params.flat());
    CHECK_THROWS(load_params(path, 0x123456ULL));
    std::filesystem::remove(path);
}

TEST_CASE("gae: lambda 0 collapses to one-step deltas") {
    Trajectory traj;
    const int len = 5;
    traj.features = Eigen::MatrixXd::Zero(2, len);
    traj.allow = Eigen::MatrixXd::Ones(2, len);
    traj.actions.assign(len, 0);
    traj.rewards = Eigen::VectorXd::LinSpaced(len, 1.0, 5.0);
    traj.values = Eigen::VectorXd::LinSpaced(len, 0.5, 2.5);
    traj.log_probs = Eigen::VectorXd::Zero(len);
    traj.dones.assign(len, 0);
    traj.bootstrap_value = 3.0;
    const double gamma = 0.9;
    auto [adv, ret] = gae(traj, gamma, 0.0);
    for (int t = 0; t < len; ++t) {
        const double next_v = t == len - 1 ? traj.bootstrap_value : traj.values(t + 1);
        CHECK(adv(t) == doctest::Approx(traj.rewards(t) + gamma * next_v - traj.values(t)));
        CHECK(ret(t) == doctest::Approx(adv(t) + traj.values(t)));
    }
}

TEST_CASE("gae: constant values, zero rewards, no terminal") {
    Trajectory traj;
    const int len = 6;
    const double v = 2.0, gamma = 0.95, lambda = 0.9;
    traj.features = Eigen::MatrixXd::Zero(1, len);
    traj.allow = Eigen::MatrixXd::Ones(2, len);
    traj.actions.assign(len, 0);
    traj.rewards = Eigen::VectorXd::Zero(len);
    traj.values = Eigen::VectorXd::Constant(len, v);
    traj.log_probs = Eigen::VectorXd::Zero(len);
    traj.dones.assign(len, 0);
    traj.bootstrap_value = v;
    auto [adv, ret] = gae(traj, gamma, lambda);
    for (int t = 0; t < len; ++t) {
        double expected = 0.0;
        for (int l = 0; l + t < len; ++l) expected += std::pow(gamma * lambda, l) * (gamma - 1.0) * v;
        CHECK(adv(t) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("gae: single-step terminal episode bootstraps zero") {
    Trajectory traj;
    traj.features = Eigen::MatrixXd::Zero(1, 1);
    traj.allow = Eigen::MatrixXd::Ones(2, 1);
    traj.actions = {1};
    traj.rewards = Eigen::VectorXd::Constant(1, 4.0);
    traj.values = Eigen::VectorXd::Constant(1, 1.5);
    traj.log_probs = Eigen::VectorXd::Zero(1);
    traj.dones = {1};
    traj.bootstrap_value = 99.0;  // ignored behind the done flag
    auto [adv, ret] = gae(traj, 0.9, 0.95);
    CHECK(adv(0) == doctest::Approx(4.0 - 1.5));
    CHECK(ret(0) == doctest::Approx(4.0));
}

TEST_CASE("gae rejects empty trajectories") {
    Trajectory traj;
    CHECK_THROWS_AS(gae(traj, 0.9, 0.95), std::invalid_argument);
}

TEST_CASE("zero advantages produce no actor gradient") {
    SeededRng rng(7, 0);
    PolicyParams params = PolicyParams::xavier_init(4, 3, rng, 8);
    TransitionBatch batch = toy_batch(rng, 4, 3, 6);
    batch.advantages.setZero();
    TrainConfig config;
    config.critic_coef = 0.0;  // isolate the actor term
    config.entropy_coef = 0.0;
    const Eigen::VectorXd grad = ppo_gradient(params, batch, config);
    CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradient matches central finite differences") {
    SeededRng rng(8, 0);
    PolicyParams params = PolicyParams::xavier_init(4, 3, rng, 6);
    TransitionBatch batch = toy_batch(rng, 4, 3, 3);
    TrainConfig config;
    config.entropy_coef = 0.01;  // exercise every term

    const Eigen::VectorXd analytic = ppo_gradient(params, batch, config);
    const double h = 1e-5;
    double max_rel = 0.0;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        PolicyParams shifted = params;
        shifted.flat()(i) += h;
        const double up = ppo_loss(shifted, batch, config);
        shifted.flat()(i) -= 2 * h;
        const double down = ppo_loss(shifted, batch, config);
        const double fd = (up - down) / (2 * h);
        const double rel =
            std::abs(analytic(i) - fd) / std::max({1e-6, std::abs(analytic(i)), std::abs(fd)});
        max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("loss statistics stay in their analytic ranges") {
    SeededRng rng(9, 0);
    PolicyParams params = PolicyParams::xavier_init(5, 4, rng, 8);
    TransitionBatch batch = toy_batch(rng, 5, 4, 12);
    TrainConfig config;
    LossStats stats;
    ppo_gradient(params, batch, config, &stats);
    CHECK(stats.value >= 0.0);
    CHECK(stats.entropy >= 0.0);
    CHECK(stats.entropy <= std::log(4.0) + 1e-12);
}

TEST_CASE("ppo_update applies clipped adam steps and detects blowups") {
    SeededRng rng(10, 0);
    PolicyParams params = PolicyParams::xavier_init(3, 2, rng, 6);
    const Eigen::VectorXd before = params.flat();

    Trajectory traj;
    const int len = 8;
    traj.features = Eigen::MatrixXd::Random(3, len);
    traj.allow = Eigen::MatrixXd::Ones(2, len);
    traj.actions.assign(len, 1);
    traj.rewards = Eigen::VectorXd::Constant(len, 1.0);
    traj.values = Eigen::VectorXd::Zero(len);
    traj.log_probs = Eigen::VectorXd::Constant(len, std::log(0.5));
    traj.dones.assign(len, 0);
    traj.dones.back() = 1;

    TrainConfig config;
    config.epochs = 2;
    config.minibatch_size = 4;
    AdamState adam(params.size());
    SeededRng shuffle(11, 0);
    ppo_update(params, {traj}, config, adam, shuffle);
    CHECK(params.flat() != before);
    CHECK(params.all_finite());

    // a poisoned value estimate must abort the update
    Trajectory bad = traj;
    bad.values(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ppo_update(params, {bad}, config, adam, shuffle), std::domain_error);
}
