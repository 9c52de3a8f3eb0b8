#pragma once

#include <functional>
#include <vector>

#include "espark/rng.hpp"
#include "espark/types.hpp"

namespace espark {

/// Finite MDP over flattened joint actions; exact calculators below
/// treat it as the ground truth the learning stack is checked against.
struct TabularMDP {
    int states = 0;
    int actions = 0;
    std::vector<std::vector<std::vector<double>>> transition;  // P[s][a][s']
    std::vector<std::vector<double>> reward;                   // R[s][a]
    double discount = 0.0;
    std::vector<double> initial_dist;

    void validate() const;

    /// Single-state (bandit) helper; discount 0 makes the pruning
    /// identity below exact.
    static TabularMDP bandit(std::vector<double> arm_rewards, double discount = 0.0);
};

/// Fully cooperative one-state game: all agents picking 1 pays r1, any
/// mixed profile with m agents on 1 pays -m*r2.
struct OneStateGame {
    int n_agents = 2;
    double r1 = 1.0;
    double r2 = 1.0;

    void validate() const;
};

/// Probability that gradient ascent from a uniform initial shared
/// policy reaches the all-ones optimum: 1 - (r2/(r1 + N*r2))^(1/(N-1)).
double prop2_closed_form(const OneStateGame& game);

/// The interior stationary point theta* of the expected-return curve;
/// initial policies above it climb to 1, below it slide to 0.
double prop2_stationary_point(const OneStateGame& game);

struct Prop2MonteCarloConfig {
    int trials = 10'000;
    double learning_rate = 0.01;
    int steps = 10'000;
    double convergence_tol = 1e-3;
    int threads = 0;  // 0: hardware concurrency
};

struct Prop2MonteCarloResult {
    double converged_to_best_fraction = 0.0;
    int undecided_trials = 0;
};

/// Repeated gradient-ascent trials of the shared-policy objective
/// J(theta) = theta^N*r1 - N*theta*r2 + N*theta^N*r2 with theta0 ~
/// U[0,1], projected onto [0,1]; returns the fraction reaching theta=1.
Prop2MonteCarloResult prop2_monte_carlo(const OneStateGame& game,
                                        const Prop2MonteCarloConfig& config, SeededRng rng);

/// Ascent trajectory for a single start, exposed for the fixed-point
/// edge cases.
double prop2_single_trial(const OneStateGame& game, double theta0,
                          const Prop2MonteCarloConfig& config);

/// Exact V per state: solves (I - gamma * P_pi) V = R_pi.
/// policy[s][a] rows must sum to 1.
std::vector<double> exact_value(const TabularMDP& mdp, const std::vector<std::vector<double>>& policy);

struct Prop1CheckResult {
    double max_residual = 0.0;
    std::vector<double> masked_minus_unmasked;  // V_{pi_E} - V_pi per state
};

/// Verifies the pruned-policy value identity
///   V_{pi_E}(s) - V_pi(s) = -sum_a (1-E) pi A_pi / sum_a E pi
/// with Q, V, A computed for pi. The identity is exact in its one-step
/// form, so callers use single-state MDPs (bandit() with discount 0);
/// V_{pi_E} is computed independently via exact_value on the
/// renormalized policy. Requires at least one unmasked action per state.
Prop1CheckResult prop1_identity_check(const TabularMDP& mdp,
                                      const std::vector<std::vector<double>>& policy,
                                      const std::vector<std::vector<bool>>& exploration);

/// Renormalized policy under a mask, with the all-masked fallback.
std::vector<std::vector<double>> masked_policy(const std::vector<std::vector<double>>& policy,
                                               const std::vector<std::vector<bool>>& exploration);

}  // namespace espark
