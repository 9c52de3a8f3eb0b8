#pragma once

#include <functional>
#include <string>
#include <vector>

#include "espark/env.hpp"
#include "espark/rng.hpp"

namespace espark {

/// Order-up-to target per (echelon, sku): order max(0, z - position).
struct BaseStockPolicy {
    std::vector<std::vector<Units>> z;

    Units level(int echelon, int sku) const { return z[echelon][sku]; }
};

/// (S, s) rule per (echelon, sku): when position < s, order up to S.
struct SsPolicy {
    std::vector<std::vector<Units>> small_s;
    std::vector<std::vector<Units>> big_s;
};

/// Decides the full order matrix for one step. Policies may inspect the
/// env (read-only) for realized history; `pending` holds the previous
/// step's orders, which are en route to the upstream echelon but not
/// yet in the pipeline.
using OrderFn = std::function<std::vector<std::vector<Units>>(
    const InventoryEnv& env, const std::vector<Observation>& obs,
    const std::vector<std::vector<Units>>& pending)>;

/// Rolls one episode under the policy; returns the finished ledger.
EpisodeLedger rollout_policy(InventoryEnv& env, Segment segment, int offset,
                             const OrderFn& policy);

OrderFn base_stock_order_fn(const BaseStockPolicy& policy);
OrderFn ss_order_fn(const SsPolicy& policy);
OrderFn never_order_fn();
/// Uniform-random pick from the action grid (the trainer's quantity
/// discretization), used as the sanity-floor policy.
OrderFn uniform_random_order_fn(SeededRng rng);

/// Grid-searches z per (echelon, sku) on the training segment,
/// maximizing simulated profit of a single-SKU copy of the scenario
/// with unconstrained capacity (the classical rule is capacity-blind).
/// Multi-echelon levels are fit by coordinate passes, top echelon
/// first. Deterministic; ties break toward the smallest z.
BaseStockPolicy fit_base_stock(const DemandTrace& train, const ScenarioConfig& scenario);

/// Coarse-to-fine search over (s, S) pairs with s <= S; ties break
/// toward the smallest S, then the smallest s.
SsPolicy fit_ss(const DemandTrace& train, const ScenarioConfig& scenario);

struct DynamicBaseStockConfig {
    int refit_period = 20;
    int window = 60;
};

/// Base stock with periodic refits on a trailing demand window: the
/// initial fit uses the tail of the training segment, later fits fold
/// in demand realized during the evaluation episode.
OrderFn dynamic_base_stock_fn(const DemandTrace& train, const ScenarioConfig& scenario,
                              DynamicBaseStockConfig config = {});

/// Each action independently masked with probability p; an all-masked
/// draw is resampled once, then falls back to all-allow.
ActionMask random_pruning_mask(SeededRng& rng, double p, int action_count);

/// Allows actions whose quantity lies in [r1*delta, r2*delta] with
/// delta = S - s when the inventory position sits below s, and only the
/// no-order action otherwise. When the interval catches no grid
/// quantity, the action closest to delta stays available.
ActionMask ss_pruning_mask(const Observation& obs, const SsPolicy& policy,
                           const std::vector<double>& action_multipliers, double r1 = 0.5,
                           double r2 = 2.0);

/// Denies any action that would push stock + pipeline past this SKU's
/// fair share of warehouse capacity (W / #SKU); action 0 always stays.
ActionMask upbound_pruning_mask(const Observation& obs, const ScenarioConfig& scenario);

/// JSON (de)serialization of fitted policies (docs/formats.md).
std::string base_stock_to_json(const BaseStockPolicy& policy);
BaseStockPolicy base_stock_from_json(const std::string& text);
std::string ss_to_json(const SsPolicy& policy);
SsPolicy ss_from_json(const std::string& text);

}  // namespace espark
