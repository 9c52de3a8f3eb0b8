#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "espark/env.hpp"
#include "espark/net.hpp"
#include "espark/types.hpp"

namespace espark {

/// PPO hyperparameters; defaults are the pinned training configuration.
struct TrainConfig {
    double discount = 0.985;
    double gae_lambda = 0.95;
    double learning_rate = 5e-4;
    double clip_epsilon = 0.2;
    double critic_coef = 0.5;
    double entropy_coef = 0.0;
    double grad_norm_clip = 10.0;
    int accumulated_episodes = 4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-5;
    int epochs = 4;
    int minibatch_size = 256;
    long long total_steps = 200'000;
    int checkpoint_interval = 10;  // updates between evaluations
    int eval_episodes = 3;
    /// Checkpoint evaluation selects argmax actions (the test-rollout
    /// convention of the shared-parameter MARL frameworks this
    /// configuration mirrors); sampling remains available for studies.
    bool greedy_eval = true;
    int hidden = 64;
};

/// What the rollout loop needs from an environment. Implementations own
/// their episode state; the trainer drives reset/step and the policy.
class RolloutEnv {
public:
    virtual ~RolloutEnv() = default;
    virtual int agent_count() const = 0;
    virtual int action_count() const = 0;
    virtual int feature_dim() const = 0;
    /// Group index used by action-frequency analytics (echelon id for
    /// the inventory game).
    virtual int agent_group(int) const { return 0; }
    virtual int group_count() const { return 1; }

    /// Starts episode `episode_index`; evaluation episodes run on the
    /// held-out segment.
    virtual void reset(long long episode_index, bool evaluation) = 0;
    virtual bool done() const = 0;
    virtual const Observation& observation(int agent) const = 0;
    virtual void fill_features(int agent, Eigen::Ref<Eigen::VectorXd> out) const = 0;
    /// Applies one joint action; returns the shared team reward.
    virtual double step(const std::vector<int>& actions) = 0;
    /// Episode accounting for feedback reports; null when not tracked.
    virtual const EpisodeLedger* episode_ledger() const { return nullptr; }
};

/// Exploration function hook: builds the allow/deny mask for one
/// agent's observation. Masking is applied during training only.
using MaskSource = std::function<ActionMask(const Observation&, SeededRng&)>;

/// Per-agent collected episode, the unit GAE runs on.
struct Trajectory {
    Eigen::MatrixXd features;   // feature_dim x T
    std::vector<int> actions;
    Eigen::MatrixXd allow;      // action_count x T, effective (post-fallback) masks
    Eigen::VectorXd rewards;    // shared team reward per step
    Eigen::VectorXd values;
    Eigen::VectorXd log_probs;  // log pi_E(a) as acted
    std::vector<char> dones;
    double bootstrap_value = 0.0;

    int length() const { return static_cast<int>(actions.size()); }
};

/// GAE advantages and returns; advantages come back unnormalized
/// (normalization happens per update batch).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gae(const Trajectory& traj, double discount,
                                                double lambda);

/// Flattened transitions feeding one PPO update.
struct TransitionBatch {
    Eigen::MatrixXd features;   // feature_dim x B
    std::vector<int> actions;
    Eigen::MatrixXd allow;      // action_count x B
    Eigen::VectorXd old_log_probs;
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;

    Eigen::Index size() const { return old_log_probs.size(); }
};

struct LossStats {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;  // pre-clip, final minibatch
};

/// Clipped-surrogate PPO objective (negated for minimization):
/// -min(rho*A, clip(rho)*A) + critic_coef*(V-ret)^2 - entropy_coef*H.
/// Ratios use the stored masked log-probabilities.
double ppo_loss(const PolicyParams& params, const TransitionBatch& batch,
                const TrainConfig& config);
Eigen::VectorXd ppo_gradient(const PolicyParams& params, const TransitionBatch& batch,
                             const TrainConfig& config, LossStats* stats = nullptr);

/// Adam state over the flat parameter vector.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long long t = 0;

    explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// One full PPO update (epochs x minibatches) over the batch episodes.
/// Throws std::domain_error on a non-finite loss so callers can mark
/// the candidate as failed.
LossStats ppo_update(PolicyParams& params, const std::vector<Trajectory>& episodes,
                     const TrainConfig& config, AdamState& adam, SeededRng& shuffle_rng);

/// Evaluation-episode aggregates captured at each checkpoint.
struct EvalAggregates {
    double mean_total_profit = 0.0;
    int episodes = 0;
    long long steps = 0;
    RewardBreakdown component_totals;
    Units demand_echelon0 = 0;
    Units sold_echelon0 = 0;
    Units arrived_total = 0;
    Units received_total = 0;
    std::vector<std::vector<long long>> action_counts;  // [group][action]
};

struct TrainResult {
    PolicyParams params;
    std::vector<double> checkpoint_scores;
    EvalAggregates last_eval;
    long long env_steps = 0;
    long long updates = 0;
    long long mask_fallbacks = 0;
};

using CheckpointHook = std::function<void(int checkpoint_index, double score)>;
using EnvFactory = std::function<std::unique_ptr<RolloutEnv>()>;

/// Collect/update loop with checkpoint evaluation of the unmasked
/// policy on held-out episodes. Fully determined by (seed stream,
/// config, exploration source).
TrainResult train(const EnvFactory& make_env, const MaskSource& exploration,
                  const TrainConfig& config, const SeededRng& rng,
                  const CheckpointHook& hook = nullptr,
                  std::optional<PolicyParams> initial_params = std::nullopt);

/// Rolls out a fixed policy (no learning) on evaluation episodes;
/// shared by baselines and reports.
EvalAggregates evaluate_policy(RolloutEnv& env, const PolicyParams& params, int episodes,
                               SeededRng rng, bool greedy = true);

/// Inventory adapter: maps action indices to replenishment quantities
/// and exposes normalized observation features.
class InventoryRolloutEnv final : public RolloutEnv {
public:
    InventoryRolloutEnv(ScenarioConfig config, DemandTrace trace);

    int agent_count() const override { return env_.config().agent_count(); }
    int action_count() const override { return env_.config().action_count(); }
    int feature_dim() const override { return 12; }
    int agent_group(int agent) const override { return agent / env_.config().skus; }
    int group_count() const override { return env_.config().echelons; }

    void reset(long long episode_index, bool evaluation) override;
    bool done() const override { return env_.done(); }
    const Observation& observation(int agent) const override { return observations_[agent]; }
    void fill_features(int agent, Eigen::Ref<Eigen::VectorXd> out) const override;
    double step(const std::vector<int>& actions) override;
    const EpisodeLedger* episode_ledger() const override { return &env_.ledger(); }

    InventoryEnv& env() { return env_; }

private:
    InventoryEnv env_;
    std::vector<Observation> observations_;
};

/// One-state cooperative game adapter (all-ones pays r1, a mixed
/// profile with m ones pays -m*r2); episodes are a single step.
class OneStateGameEnv final : public RolloutEnv {
public:
    OneStateGameEnv(int n_agents, double r1, double r2);

    int agent_count() const override { return n_agents_; }
    int action_count() const override { return 2; }
    int feature_dim() const override { return 1; }

    void reset(long long episode_index, bool evaluation) override;
    bool done() const override { return done_; }
    const Observation& observation(int) const override { return obs_; }
    void fill_features(int, Eigen::Ref<Eigen::VectorXd> out) const override { out(0) = 1.0; }
    double step(const std::vector<int>& actions) override;

private:
    int n_agents_;
    double r1_;
    double r2_;
    bool done_ = true;
    Observation obs_;
};

}  // namespace espark
