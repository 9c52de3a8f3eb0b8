#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "espark/masking.hpp"
#include "espark/rng.hpp"

namespace espark {

/// All trainable weights of the shared per-agent actor-critic, stored
/// as one flat vector so copy, compare, checkpointing, and the Adam
/// state stay trivial. Layout (column-major blocks, actor then critic):
/// W1(h x in), b1, W2(h x h), b2, W3(out x h), b3.
class PolicyParams {
public:
    PolicyParams(int obs_dim, int action_count, int hidden = 64);

    static PolicyParams xavier_init(int obs_dim, int action_count, SeededRng& rng,
                                    int hidden = 64);

    int obs_dim() const { return obs_dim_; }
    int action_count() const { return action_count_; }
    int hidden() const { return hidden_; }

    Eigen::VectorXd& flat() { return flat_; }
    const Eigen::VectorXd& flat() const { return flat_; }
    Eigen::Index size() const { return flat_.size(); }

    bool all_finite() const { return flat_.allFinite(); }

    // Per-layer views into the flat vector. `which`0 = actor, 1 = critic.
    Eigen::Map<Eigen::MatrixXd> weight(int which, int layer);
    Eigen::Map<const Eigen::MatrixXd> weight(int which, int layer) const;
    Eigen::Map<Eigen::VectorXd> bias(int which, int layer);
    Eigen::Map<const Eigen::VectorXd> bias(int which, int layer) const;

private:
    struct Block {
        Eigen::Index offset;
        Eigen::Index rows;
        Eigen::Index cols;
    };
    Block block(int which, int layer, bool is_bias) const;

    int obs_dim_;
    int action_count_;
    int hidden_;
    Eigen::VectorXd flat_;
};

/// tanh-tanh-linear MLP forward pass for a batch of observations
/// (one column per sample); keeps the hidden activations for backprop.
struct ForwardPass {
    Eigen::MatrixXd h1;
    Eigen::MatrixXd h2;
    Eigen::MatrixXd out;
};

void mlp_forward(const PolicyParams& params, int which, const Eigen::MatrixXd& features,
                 ForwardPass& pass);

/// Single-observation policy head: masked values are not applied here;
/// masking happens at action-selection time.
std::pair<ActionDistribution, double> forward(const PolicyParams& params,
                                              const Eigen::VectorXd& features);

/// Versioned binary checkpoint: flat parameter vector + config hash.
void save_params(const std::string& path, const PolicyParams& params,
                 std::uint64_t config_hash);
PolicyParams load_params(const std::string& path, std::uint64_t expected_config_hash);

}  // namespace espark
