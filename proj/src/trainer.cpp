#include "espark/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace espark {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Masked log-softmax for one logits column; rows with allow == 0 get
/// probability 0 / log-prob -inf.
void masked_log_softmax(const Eigen::VectorXd& logits, const Eigen::VectorXd& allow,
                        Eigen::VectorXd& probs, Eigen::VectorXd& log_probs) {
    const Eigen::Index n = logits.size();
    double max_logit = kNegInf;
    for (Eigen::Index j = 0; j < n; ++j)
        if (allow(j) > 0.0 && logits(j) > max_logit) max_logit = logits(j);
    double sum = 0.0;
    probs.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        probs(j) = allow(j) > 0.0 ? std::exp(logits(j) - max_logit) : 0.0;
        sum += probs(j);
    }
    const double log_sum = std::log(sum);
    log_probs.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (allow(j) > 0.0) {
            probs(j) /= sum;
            log_probs(j) = logits(j) - max_logit - log_sum;
        } else {
            log_probs(j) = kNegInf;
        }
    }
}

/// Shared loss/gradient core. Returns the scalar loss; when grad_out is
/// non-null it receives dLoss/dparams in PolicyParams layout.
double ppo_eval(const PolicyParams& params, const TransitionBatch& batch,
                const TrainConfig& config, Eigen::VectorXd* grad_out, LossStats* stats) {
    const Eigen::Index batch_size = batch.size();
    if (batch_size == 0) throw std::invalid_argument("empty transition batch");
    const double inv_b = 1.0 / static_cast<double>(batch_size);

    ForwardPass actor;
    mlp_forward(params, 0, batch.features, actor);
    ForwardPass critic;
    mlp_forward(params, 1, batch.features, critic);

    Eigen::MatrixXd actor_logit_grad;
    Eigen::MatrixXd critic_out_grad;
    if (grad_out) {
        actor_logit_grad = Eigen::MatrixXd::Zero(actor.out.rows(), batch_size);
        critic_out_grad = Eigen::MatrixXd::Zero(1, batch_size);
    }

    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy_sum = 0.0;
    Eigen::VectorXd probs, log_probs;
    for (Eigen::Index i = 0; i < batch_size; ++i) {
        masked_log_softmax(actor.out.col(i), batch.allow.col(i), probs, log_probs);
        const int action = batch.actions[static_cast<std::size_t>(i)];
        const double new_log_prob = log_probs(action);
        const double advantage = batch.advantages(i);
        const double ratio = std::exp(new_log_prob - batch.old_log_probs(i));
        const double clipped =
            std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
        policy_loss -= std::min(ratio * advantage, clipped * advantage);

        double entropy = 0.0;
        for (Eigen::Index j = 0; j < probs.size(); ++j)
            if (probs(j) > 0.0) entropy -= probs(j) * log_probs(j);
        entropy_sum += entropy;

        const double v = critic.out(0, i);
        const double v_err = v - batch.returns(i);
        value_loss += v_err * v_err;

        if (grad_out) {
            const bool surrogate_active = advantage >= 0.0
                                              ? ratio <= 1.0 + config.clip_epsilon
                                              : ratio >= 1.0 - config.clip_epsilon;
            const double coef = surrogate_active ? ratio * advantage : 0.0;
            for (Eigen::Index j = 0; j < probs.size(); ++j) {
                if (batch.allow(j, i) <= 0.0) continue;
                const double indicator = j == action ? 1.0 : 0.0;
                double g = -inv_b * coef * (indicator - probs(j));
                if (config.entropy_coef != 0.0 && probs(j) > 0.0) {
                    g += inv_b * config.entropy_coef * probs(j) * (log_probs(j) + entropy);
                }
                actor_logit_grad(j, i) = g;
            }
            critic_out_grad(0, i) = inv_b * 2.0 * config.critic_coef * v_err;
        }
    }

    const double loss = inv_b * (policy_loss + config.critic_coef * value_loss -
                                 config.entropy_coef * entropy_sum);
    if (stats) {
        stats->total = loss;
        stats->policy = inv_b * policy_loss;
        stats->value = inv_b * value_loss;
        stats->entropy = inv_b * entropy_sum;
    }
    if (!grad_out) return loss;

    PolicyParams grads(params.obs_dim(), params.action_count(), params.hidden());
    auto backprop = [&](int which, const ForwardPass& pass, const Eigen::MatrixXd& out_grad) {
        const Eigen::MatrixXd g2 =
            (params.weight(which, 2).transpose() * out_grad).cwiseProduct(
                (1.0 - pass.h2.array().square()).matrix());
        const Eigen::MatrixXd g1 =
            (params.weight(which, 1).transpose() * g2).cwiseProduct(
                (1.0 - pass.h1.array().square()).matrix());
        grads.weight(which, 2) = out_grad * pass.h2.transpose();
        grads.bias(which, 2) = out_grad.rowwise().sum();
        grads.weight(which, 1) = g2 * pass.h1.transpose();
        grads.bias(which, 1) = g2.rowwise().sum();
        grads.weight(which, 0) = g1 * batch.features.transpose();
        grads.bias(which, 0) = g1.rowwise().sum();
    };
    backprop(0, actor, actor_logit_grad);
    backprop(1, critic, critic_out_grad);
    *grad_out = grads.flat();
    return loss;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> gae(const Trajectory& traj, double discount,
                                                double lambda) {
    const int length = traj.length();
    if (length == 0) throw std::invalid_argument("empty trajectory");
    Eigen::VectorXd advantages(length);
    double acc = 0.0;
    for (int t = length - 1; t >= 0; --t) {
        const double next_value = t == length - 1 ? traj.bootstrap_value : traj.values(t + 1);
        const double nonterminal = traj.dones[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
        const double delta =
            traj.rewards(t) + discount * next_value * nonterminal - traj.values(t);
        acc = delta + discount * lambda * nonterminal * acc;
        advantages(t) = acc;
    }
    Eigen::VectorXd returns = advantages + traj.values;
    return {std::move(advantages), std::move(returns)};
}

double ppo_loss(const PolicyParams& params, const TransitionBatch& batch,
                const TrainConfig& config) {
    return ppo_eval(params, batch, config, nullptr, nullptr);
}

Eigen::VectorXd ppo_gradient(const PolicyParams& params, const TransitionBatch& batch,
                             const TrainConfig& config, LossStats* stats) {
    Eigen::VectorXd grad;
    ppo_eval(params, batch, config, &grad, stats);
    return grad;
}

namespace {

void adam_step(PolicyParams& params, const Eigen::VectorXd& grad, AdamState& adam,
               const TrainConfig& config) {
    adam.t += 1;
    adam.m = config.adam_beta1 * adam.m + (1.0 - config.adam_beta1) * grad;
    adam.v = config.adam_beta2 * adam.v.array().matrix() +
             (1.0 - config.adam_beta2) * grad.array().square().matrix();
    const double m_corr = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.t));
    const double v_corr = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.t));
    params.flat().array() -=
        config.learning_rate * (adam.m.array() / m_corr) /
        ((adam.v.array() / v_corr).sqrt() + config.adam_eps);
}

}  // namespace

LossStats ppo_update(PolicyParams& params, const std::vector<Trajectory>& episodes,
                     const TrainConfig& config, AdamState& adam, SeededRng& shuffle_rng) {
    Eigen::Index total = 0;
    for (const auto& traj : episodes) total += traj.length();
    if (total == 0) throw std::invalid_argument("update needs at least one transition");

    const int feature_dim = static_cast<int>(episodes.front().features.rows());
    const int action_count = static_cast<int>(episodes.front().allow.rows());
    TransitionBatch all;
    all.features.resize(feature_dim, total);
    all.allow.resize(action_count, total);
    all.actions.resize(static_cast<std::size_t>(total));
    all.old_log_probs.resize(total);
    all.advantages.resize(total);
    all.returns.resize(total);

    Eigen::Index col = 0;
    for (const auto& traj : episodes) {
        auto [adv, ret] = gae(traj, config.discount, config.gae_lambda);
        const int len = traj.length();
        all.features.middleCols(col, len) = traj.features;
        all.allow.middleCols(col, len) = traj.allow;
        for (int t = 0; t < len; ++t)
            all.actions[static_cast<std::size_t>(col + t)] = traj.actions[static_cast<std::size_t>(t)];
        all.old_log_probs.segment(col, len) = traj.log_probs;
        all.advantages.segment(col, len) = adv;
        all.returns.segment(col, len) = ret;
        col += len;
    }

    // Normalize advantages over the whole update batch.
    const double mean = all.advantages.mean();
    const double var = (all.advantages.array() - mean).square().sum() / static_cast<double>(total);
    const double stddev = std::max(std::sqrt(var), 1e-8);
    all.advantages = ((all.advantages.array() - mean) / stddev).matrix();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), 0);

    const Eigen::Index minibatch =
        std::min<Eigen::Index>(std::max(1, config.minibatch_size), total);
    LossStats accumulated;
    long long minibatches = 0;
    TransitionBatch sub;
    sub.features.resize(feature_dim, minibatch);
    sub.allow.resize(action_count, minibatch);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (Eigen::Index start = 0; start < total; start += minibatch) {
            const Eigen::Index count = std::min(minibatch, total - start);
            sub.features.resize(feature_dim, count);
            sub.allow.resize(action_count, count);
            sub.actions.resize(static_cast<std::size_t>(count));
            sub.old_log_probs.resize(count);
            sub.advantages.resize(count);
            sub.returns.resize(count);
            for (Eigen::Index i = 0; i < count; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                sub.features.col(i) = all.features.col(src);
                sub.allow.col(i) = all.allow.col(src);
                sub.actions[static_cast<std::size_t>(i)] = all.actions[static_cast<std::size_t>(src)];
                sub.old_log_probs(i) = all.old_log_probs(src);
                sub.advantages(i) = all.advantages(src);
                sub.returns(i) = all.returns(src);
            }
            LossStats stats;
            Eigen::VectorXd grad;
            const double loss = ppo_eval(params, sub, config, &grad, &stats);
            if (!std::isfinite(loss) || !grad.allFinite())
                throw std::domain_error("non-finite PPO loss; candidate update aborted");
            const double norm = grad.norm();
            stats.grad_norm = norm;
            if (norm > config.grad_norm_clip && norm > 0.0)
                grad *= config.grad_norm_clip / norm;
            adam_step(params, grad, adam, config);
            accumulated.total += stats.total;
            accumulated.policy += stats.policy;
            accumulated.value += stats.value;
            accumulated.entropy += stats.entropy;
            accumulated.grad_norm = stats.grad_norm;
            ++minibatches;
        }
    }
    if (!params.all_finite())
        throw std::domain_error("non-finite parameters after update; candidate failed");
    const double inv = 1.0 / static_cast<double>(minibatches);
    accumulated.total *= inv;
    accumulated.policy *= inv;
    accumulated.value *= inv;
    accumulated.entropy *= inv;
    return accumulated;
}

namespace {

struct CollectedEpisode {
    std::vector<Trajectory> per_agent;
    int steps = 0;
};

/// Runs one episode with the current policy; masks apply only when
/// `exploration` is set (training collection).
CollectedEpisode collect_episode(RolloutEnv& env, const PolicyParams& params,
                                 long long episode_index, bool evaluation, bool greedy,
                                 const MaskSource& exploration, SeededRng& action_rng,
                                 SeededRng& mask_rng, long long* fallback_count,
                                 std::vector<std::vector<long long>>* action_counts) {
    const int agents = env.agent_count();
    const int actions = env.action_count();
    env.reset(episode_index, evaluation);

    std::vector<Eigen::VectorXd> features_steps;
    std::vector<std::vector<int>> action_steps;
    std::vector<std::vector<double>> logp_steps;
    std::vector<std::vector<double>> value_steps;
    std::vector<Eigen::MatrixXd> allow_steps;
    std::vector<double> rewards;

    Eigen::MatrixXd features(env.feature_dim(), agents);
    ForwardPass actor_pass, critic_pass;
    std::vector<int> joint_action(static_cast<std::size_t>(agents));

    while (!env.done()) {
        for (int k = 0; k < agents; ++k) env.fill_features(k, features.col(k));
        mlp_forward(params, 0, features, actor_pass);
        mlp_forward(params, 1, features, critic_pass);
        if (!actor_pass.out.allFinite() || !critic_pass.out.allFinite())
            throw std::domain_error("non-finite network activation during rollout");

        Eigen::MatrixXd allow = Eigen::MatrixXd::Ones(actions, agents);
        std::vector<int> acts(static_cast<std::size_t>(agents));
        std::vector<double> logps(static_cast<std::size_t>(agents));
        std::vector<double> values(static_cast<std::size_t>(agents));
        for (int k = 0; k < agents; ++k) {
            std::vector<double> logits(actor_pass.out.data() + k * actions,
                                       actor_pass.out.data() + (k + 1) * actions);
            ActionDistribution dist = ActionDistribution::from_logits(logits);
            if (exploration && !evaluation) {
                ActionMask mask = exploration(env.observation(k), mask_rng);
                bool fallback = false;
                ActionDistribution masked = apply_mask(dist, mask, &fallback);
                if (fallback) {
                    if (fallback_count) ++*fallback_count;
                } else {
                    for (int a = 0; a < actions; ++a)
                        allow(a, k) = mask.allow[static_cast<std::size_t>(a)] ? 1.0 : 0.0;
                }
                dist = std::move(masked);
            }
            int action;
            double logp;
            if (greedy) {
                action = 0;
                for (int a = 1; a < actions; ++a)
                    if (dist.probs[static_cast<std::size_t>(a)] >
                        dist.probs[static_cast<std::size_t>(action)])
                        action = a;
                logp = dist.log_probs[static_cast<std::size_t>(action)];
            } else {
                std::tie(action, logp) = sample(dist, action_rng);
            }
            acts[static_cast<std::size_t>(k)] = action;
            logps[static_cast<std::size_t>(k)] = logp;
            values[static_cast<std::size_t>(k)] = critic_pass.out(0, k);
            if (action_counts) ++(*action_counts)[static_cast<std::size_t>(env.agent_group(k))]
                                                 [static_cast<std::size_t>(action)];
        }
        for (int k = 0; k < agents; ++k) joint_action[static_cast<std::size_t>(k)] =
            acts[static_cast<std::size_t>(k)];
        const double team_reward = env.step(joint_action);

        features_steps.push_back(features.reshaped().eval());
        action_steps.push_back(std::move(acts));
        logp_steps.push_back(std::move(logps));
        value_steps.push_back(std::move(values));
        allow_steps.push_back(allow);
        rewards.push_back(team_reward);
    }

    const int steps = static_cast<int>(rewards.size());
    CollectedEpisode episode;
    episode.steps = steps;
    episode.per_agent.resize(static_cast<std::size_t>(agents));
    for (int k = 0; k < agents; ++k) {
        Trajectory& traj = episode.per_agent[static_cast<std::size_t>(k)];
        traj.features.resize(env.feature_dim(), steps);
        traj.allow.resize(actions, steps);
        traj.actions.resize(static_cast<std::size_t>(steps));
        traj.rewards.resize(steps);
        traj.values.resize(steps);
        traj.log_probs.resize(steps);
        traj.dones.assign(static_cast<std::size_t>(steps), 0);
        for (int t = 0; t < steps; ++t) {
            traj.features.col(t) = Eigen::Map<const Eigen::MatrixXd>(
                                       features_steps[static_cast<std::size_t>(t)].data(),
                                       env.feature_dim(), agents)
                                       .col(k);
            traj.allow.col(t) = allow_steps[static_cast<std::size_t>(t)].col(k);
            traj.actions[static_cast<std::size_t>(t)] =
                action_steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
            traj.rewards(t) = rewards[static_cast<std::size_t>(t)];
            traj.values(t) = value_steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
            traj.log_probs(t) = logp_steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
        }
        traj.dones.back() = 1;  // finite-horizon episodes terminate
        traj.bootstrap_value = 0.0;
    }
    return episode;
}

EvalAggregates run_evaluation(RolloutEnv& env, const PolicyParams& params, int episodes,
                              bool greedy, SeededRng& rng) {
    EvalAggregates agg;
    agg.action_counts.assign(static_cast<std::size_t>(env.group_count()),
                             std::vector<long long>(static_cast<std::size_t>(env.action_count()), 0));
    double profit_sum = 0.0;
    for (int e = 0; e < episodes; ++e) {
        CollectedEpisode episode = collect_episode(env, params, e, /*evaluation=*/true, greedy,
                                                   nullptr, rng, rng, nullptr, &agg.action_counts);
        const Trajectory& any = episode.per_agent.front();
        double episode_profit = any.rewards.sum();
        if (const EpisodeLedger* ledger = env.episode_ledger()) {
            agg.component_totals += ledger->component_totals;
            agg.demand_echelon0 += ledger->demand_echelon0;
            agg.sold_echelon0 += ledger->sold_echelon0;
            agg.arrived_total += ledger->arrived_total;
            agg.received_total += ledger->received_total;
            episode_profit = ledger->component_totals.total.to_f64();
        }
        profit_sum += episode_profit;
        agg.steps += episode.steps;
        agg.episodes += 1;
    }
    agg.mean_total_profit = profit_sum / std::max(1, episodes);
    return agg;
}

}  // namespace

EvalAggregates evaluate_policy(RolloutEnv& env, const PolicyParams& params, int episodes,
                               SeededRng rng, bool greedy) {
    return run_evaluation(env, params, episodes, greedy, rng);
}

TrainResult train(const EnvFactory& make_env, const MaskSource& exploration,
                  const TrainConfig& config, const SeededRng& rng, const CheckpointHook& hook,
                  std::optional<PolicyParams> initial_params) {
    std::unique_ptr<RolloutEnv> env = make_env();
    const std::uint64_t base = rng.stream_id();
    SeededRng init_rng = rng.fork(base + 11);
    SeededRng action_rng = rng.fork(base + 13);
    SeededRng mask_rng = rng.fork(base + 17);
    SeededRng shuffle_rng = rng.fork(base + 19);

    TrainResult result{
        initial_params ? std::move(*initial_params)
                       : PolicyParams::xavier_init(env->feature_dim(), env->action_count(),
                                                   init_rng, config.hidden),
        {}, {}, 0, 0, 0};
    if (result.params.obs_dim() != env->feature_dim() ||
        result.params.action_count() != env->action_count())
        throw std::invalid_argument("initial parameters do not match the environment");

    AdamState adam(result.params.size());
    long long episode_index = 0;
    int checkpoint_index = 0;
    long long last_checkpointed_update = -1;

    auto run_checkpoint = [&]() {
        ++checkpoint_index;
        SeededRng eval_rng = rng.fork(base + 100'000 + static_cast<std::uint64_t>(checkpoint_index));
        EvalAggregates agg = run_evaluation(*env, result.params, config.eval_episodes,
                                            config.greedy_eval, eval_rng);
        result.checkpoint_scores.push_back(agg.mean_total_profit);
        result.last_eval = std::move(agg);
        last_checkpointed_update = result.updates;
        if (hook) hook(checkpoint_index, result.checkpoint_scores.back());
    };

    while (result.env_steps < config.total_steps) {
        std::vector<Trajectory> batch;
        for (int e = 0; e < config.accumulated_episodes; ++e) {
            CollectedEpisode episode = collect_episode(
                *env, result.params, episode_index++, /*evaluation=*/false, /*greedy=*/false,
                exploration, action_rng, mask_rng, &result.mask_fallbacks, nullptr);
            result.env_steps += episode.steps;
            for (auto& traj : episode.per_agent) batch.push_back(std::move(traj));
        }
        ppo_update(result.params, batch, config, adam, shuffle_rng);
        result.updates += 1;
        if (config.checkpoint_interval > 0 && result.updates % config.checkpoint_interval == 0)
            run_checkpoint();
    }
    if (result.updates > 0 && last_checkpointed_update != result.updates) run_checkpoint();
    return result;
}

InventoryRolloutEnv::InventoryRolloutEnv(ScenarioConfig config, DemandTrace trace)
    : env_(std::move(config), std::move(trace)) {}

void InventoryRolloutEnv::reset(long long episode_index, bool evaluation) {
    const Segment segment = evaluation ? Segment::Test : Segment::Train;
    const int count = env_.offset_count(segment);
    if (count <= 0) throw std::invalid_argument("demand segment cannot host an episode");
    observations_ = env_.reset(segment, static_cast<int>(episode_index % count));
}

void InventoryRolloutEnv::fill_features(int agent, Eigen::Ref<Eigen::VectorXd> out) const {
    const Observation& o = observations_[static_cast<std::size_t>(agent)];
    const ScenarioConfig& c = env_.config();
    const double denom = o.mean_demand * c.demand_window + 1.0;
    const double price = o.unit_price.raw() != 0 ? o.unit_price.to_f64() : 1.0;
    out(0) = static_cast<double>(o.in_stock) / denom;
    out(1) = static_cast<double>(o.in_transit) / denom;
    out(2) = o.mean_demand / denom;
    out(3) = static_cast<double>(o.last_demand) / denom;
    // shared capacity is scaled per SKU and capped so that effectively
    // unconstrained warehouses do not saturate the first layer
    out(4) = std::min(10.0, static_cast<double>(o.capacity_remaining) / (denom * c.skus));
    out(5) = 1.0;
    out(6) = o.unit_cost.to_f64() / price;
    out(7) = o.holding_cost_rate.to_f64() / price;
    out(8) = o.backlog_cost_rate.to_f64() / price;
    out(9) = c.echelons > 1 ? static_cast<double>(o.echelon_index) / (c.echelons - 1) : 0.0;
    out(10) = static_cast<double>(o.sku_index) / c.skus;
    out(11) = o.step_fraction;
}

double InventoryRolloutEnv::step(const std::vector<int>& actions) {
    const ScenarioConfig& c = env_.config();
    if (static_cast<int>(actions.size()) != c.agent_count())
        throw std::invalid_argument("joint action size mismatch");
    std::vector<std::vector<Units>> orders(static_cast<std::size_t>(c.echelons),
                                           std::vector<Units>(static_cast<std::size_t>(c.skus)));
    for (int i = 0; i < c.echelons; ++i) {
        for (int j = 0; j < c.skus; ++j) {
            const int k = env_.agent_index(i, j);
            const Observation& o = observations_[static_cast<std::size_t>(k)];
            const double multiplier =
                c.action_multipliers[static_cast<std::size_t>(actions[static_cast<std::size_t>(k)])];
            orders[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                action_quantity(multiplier, o.mean_demand);
        }
    }
    StepResult res = env_.step(orders);
    observations_ = std::move(res.observations);
    return res.team_reward.to_f64();
}

OneStateGameEnv::OneStateGameEnv(int n_agents, double r1, double r2)
    : n_agents_(n_agents), r1_(r1), r2_(r2) {
    if (n_agents < 2) throw std::invalid_argument("the game needs at least 2 agents");
}

void OneStateGameEnv::reset(long long, bool) { done_ = false; }

double OneStateGameEnv::step(const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != n_agents_)
        throw std::invalid_argument("joint action size mismatch");
    if (done_) throw EpisodeFinishedError{};
    int ones = 0;
    for (int a : actions) ones += a == 1 ? 1 : 0;
    done_ = true;
    return ones == n_agents_ ? r1_ : -static_cast<double>(ones) * r2_;
}

}  // namespace espark
