#include "espark/toy_games.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

namespace espark {

void TabularMDP::validate() const {
    if (states < 1 || actions < 1) throw std::invalid_argument("MDP needs states and actions");
    if (!(discount >= 0.0 && discount < 1.0))
        throw std::invalid_argument("discount must lie in [0, 1)");
    if (static_cast<int>(transition.size()) != states ||
        static_cast<int>(reward.size()) != states)
        throw std::invalid_argument("transition/reward tables must cover every state");
    for (int s = 0; s < states; ++s) {
        if (static_cast<int>(transition[s].size()) != actions ||
            static_cast<int>(reward[s].size()) != actions)
            throw std::invalid_argument("transition/reward tables must cover every action");
        for (int a = 0; a < actions; ++a) {
            double sum = 0.0;
            for (double p : transition[s][a]) {
                if (p < 0.0) throw std::invalid_argument("transition probabilities must be >= 0");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::invalid_argument("each transition row must sum to 1");
        }
    }
}

TabularMDP TabularMDP::bandit(std::vector<double> arm_rewards, double discount) {
    TabularMDP mdp;
    mdp.states = 1;
    mdp.actions = static_cast<int>(arm_rewards.size());
    mdp.discount = discount;
    mdp.transition = {std::vector<std::vector<double>>(mdp.actions, {1.0})};
    mdp.reward = {std::move(arm_rewards)};
    mdp.initial_dist = {1.0};
    mdp.validate();
    return mdp;
}

void OneStateGame::validate() const {
    if (n_agents < 2) throw std::invalid_argument("the game needs at least 2 agents");
    if (!(r1 > 0.0) || !(r2 > 0.0)) throw std::invalid_argument("r1 and r2 must be positive");
}

double prop2_stationary_point(const OneStateGame& game) {
    game.validate();
    return std::pow(game.r2 / (game.r1 + game.n_agents * game.r2),
                    1.0 / (game.n_agents - 1));
}

double prop2_closed_form(const OneStateGame& game) {
    return 1.0 - prop2_stationary_point(game);
}

namespace {

double objective_gradient(const OneStateGame& game, double theta) {
    const int n = game.n_agents;
    return n * std::pow(theta, n - 1) * (game.r1 + n * game.r2) - n * game.r2;
}

}  // namespace

double prop2_single_trial(const OneStateGame& game, double theta0,
                          const Prop2MonteCarloConfig& config) {
    double theta = theta0;
    for (int step = 0; step < config.steps; ++step) {
        const double grad = objective_gradient(game, theta);
        if (!std::isfinite(grad)) throw std::domain_error("non-finite policy gradient");
        theta = std::clamp(theta + config.learning_rate * grad, 0.0, 1.0);
        if (theta <= 0.0 || theta >= 1.0) break;
    }
    return theta;
}

Prop2MonteCarloResult prop2_monte_carlo(const OneStateGame& game,
                                        const Prop2MonteCarloConfig& config, SeededRng rng) {
    game.validate();
    if (config.trials < 1) throw std::invalid_argument("trials must be >= 1");

    int workers = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, config.trials));

    // Each trial owns stream (base + trial index), so the count is
    // independent of how trials are sliced across workers.
    const std::uint64_t base_stream = rng.stream_id();
    auto run_range = [&](int lo, int hi) {
        std::pair<long, int> counts{0, 0};  // hits, undecided
        for (int trial = lo; trial < hi; ++trial) {
            SeededRng trial_rng = rng.fork(base_stream + 1 + static_cast<std::uint64_t>(trial));
            const double theta0 = trial_rng.uniform01();
            const double theta = prop2_single_trial(game, theta0, config);
            if (std::abs(theta - 1.0) < config.convergence_tol) {
                counts.first += 1;
            } else if (!(std::abs(theta) < config.convergence_tol)) {
                counts.second += 1;
            }
        }
        return counts;
    };

    std::vector<std::future<std::pair<long, int>>> futures;
    const int chunk = (config.trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(config.trials, lo + chunk);
        if (lo >= hi) break;
        futures.push_back(std::async(std::launch::async, run_range, lo, hi));
    }
    long hits = 0;
    int undecided = 0;
    for (auto& f : futures) {
        auto [h, u] = f.get();
        hits += h;
        undecided += u;
    }
    Prop2MonteCarloResult result;
    result.converged_to_best_fraction = static_cast<double>(hits) / config.trials;
    result.undecided_trials = undecided;
    return result;
}

std::vector<double> exact_value(const TabularMDP& mdp,
                                const std::vector<std::vector<double>>& policy) {
    mdp.validate();
    if (static_cast<int>(policy.size()) != mdp.states)
        throw std::invalid_argument("policy must cover every state");
    for (const auto& row : policy) {
        if (static_cast<int>(row.size()) != mdp.actions)
            throw std::invalid_argument("policy rows must cover every action");
        double sum = 0.0;
        for (double p : row) sum += p;
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("policy rows must sum to 1");
    }

    const int n = mdp.states;
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd reward_pi(n);
    for (int s = 0; s < n; ++s) {
        double r = 0.0;
        for (int a = 0; a < mdp.actions; ++a) {
            r += policy[s][a] * mdp.reward[s][a];
            for (int s2 = 0; s2 < n; ++s2)
                system(s, s2) -= mdp.discount * policy[s][a] * mdp.transition[s][a][s2];
        }
        reward_pi(s) = r;
    }
    Eigen::VectorXd v = system.partialPivLu().solve(reward_pi);
    return {v.data(), v.data() + n};
}

std::vector<std::vector<double>> masked_policy(const std::vector<std::vector<double>>& policy,
                                               const std::vector<std::vector<bool>>& exploration) {
    std::vector<std::vector<double>> out = policy;
    for (std::size_t s = 0; s < policy.size(); ++s) {
        double kept = 0.0;
        for (std::size_t a = 0; a < policy[s].size(); ++a)
            if (exploration[s][a]) kept += policy[s][a];
        if (!(kept > 0.0)) continue;  // all-masked fallback: pi unchanged
        for (std::size_t a = 0; a < policy[s].size(); ++a)
            out[s][a] = exploration[s][a] ? policy[s][a] / kept : 0.0;
    }
    return out;
}

Prop1CheckResult prop1_identity_check(const TabularMDP& mdp,
                                      const std::vector<std::vector<double>>& policy,
                                      const std::vector<std::vector<bool>>& exploration) {
    mdp.validate();
    for (int s = 0; s < mdp.states; ++s) {
        bool any = false;
        double kept = 0.0;
        for (int a = 0; a < mdp.actions; ++a) {
            if (exploration[s][a]) {
                any = true;
                kept += policy[s][a];
            }
        }
        if (!any || !(kept > 0.0))
            throw std::invalid_argument("every state needs at least one unmasked action with mass");
    }

    const std::vector<double> v_pi = exact_value(mdp, policy);
    const std::vector<double> v_masked = exact_value(mdp, masked_policy(policy, exploration));

    Prop1CheckResult result;
    result.masked_minus_unmasked.resize(mdp.states);
    for (int s = 0; s < mdp.states; ++s) {
        // Q and A for the unmasked policy.
        double pruned_weighted_advantage = 0.0;
        double kept_mass = 0.0;
        for (int a = 0; a < mdp.actions; ++a) {
            double q = mdp.reward[s][a];
            for (int s2 = 0; s2 < mdp.states; ++s2)
                q += mdp.discount * mdp.transition[s][a][s2] * v_pi[s2];
            const double advantage = q - v_pi[s];
            if (!exploration[s][a]) pruned_weighted_advantage += policy[s][a] * advantage;
            else kept_mass += policy[s][a];
        }
        const double rhs = -pruned_weighted_advantage / kept_mass;
        const double lhs = v_masked[s] - v_pi[s];
        result.masked_minus_unmasked[s] = lhs;
        result.max_residual = std::max(result.max_residual, std::abs(lhs - rhs));
    }
    return result;
}

}  // namespace espark
