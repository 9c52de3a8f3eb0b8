#include "espark/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <thread>

#include <json.hpp>

namespace espark {

namespace {

Units position_of(const Observation& obs, Units pending) {
    return obs.in_stock + obs.in_transit + pending;
}

std::vector<std::vector<Units>> zero_orders(const ScenarioConfig& c) {
    return std::vector<std::vector<Units>>(static_cast<std::size_t>(c.echelons),
                                           std::vector<Units>(static_cast<std::size_t>(c.skus), 0));
}

}  // namespace

EpisodeLedger rollout_policy(InventoryEnv& env, Segment segment, int offset,
                             const OrderFn& policy) {
    std::vector<Observation> obs = env.reset(segment, offset);
    std::vector<std::vector<Units>> pending = zero_orders(env.config());
    while (!env.done()) {
        std::vector<std::vector<Units>> orders = policy(env, obs, pending);
        StepResult res = env.step(orders);
        obs = std::move(res.observations);
        pending = std::move(orders);
    }
    return env.ledger();
}

OrderFn base_stock_order_fn(const BaseStockPolicy& policy) {
    return [policy](const InventoryEnv& env, const std::vector<Observation>& obs,
                    const std::vector<std::vector<Units>>& pending) {
        const ScenarioConfig& c = env.config();
        auto orders = zero_orders(c);
        for (int i = 0; i < c.echelons; ++i) {
            for (int j = 0; j < c.skus; ++j) {
                const Observation& o = obs[static_cast<std::size_t>(env.agent_index(i, j))];
                const Units pos = position_of(o, pending[i][j]);
                orders[i][j] = std::max<Units>(0, policy.level(i, j) - pos);
            }
        }
        return orders;
    };
}

OrderFn ss_order_fn(const SsPolicy& policy) {
    return [policy](const InventoryEnv& env, const std::vector<Observation>& obs,
                    const std::vector<std::vector<Units>>& pending) {
        const ScenarioConfig& c = env.config();
        auto orders = zero_orders(c);
        for (int i = 0; i < c.echelons; ++i) {
            for (int j = 0; j < c.skus; ++j) {
                const Observation& o = obs[static_cast<std::size_t>(env.agent_index(i, j))];
                const Units pos = position_of(o, pending[i][j]);
                if (pos < policy.small_s[i][j])
                    orders[i][j] = std::max<Units>(0, policy.big_s[i][j] - pos);
            }
        }
        return orders;
    };
}

OrderFn never_order_fn() {
    return [](const InventoryEnv& env, const std::vector<Observation>&,
              const std::vector<std::vector<Units>>&) { return zero_orders(env.config()); };
}

OrderFn uniform_random_order_fn(SeededRng rng) {
    auto shared_rng = std::make_shared<SeededRng>(rng);
    return [shared_rng](const InventoryEnv& env, const std::vector<Observation>& obs,
                        const std::vector<std::vector<Units>>&) {
        const ScenarioConfig& c = env.config();
        auto orders = zero_orders(c);
        for (int i = 0; i < c.echelons; ++i) {
            for (int j = 0; j < c.skus; ++j) {
                const Observation& o = obs[static_cast<std::size_t>(env.agent_index(i, j))];
                const std::size_t pick =
                    shared_rng->uniform_int(static_cast<std::uint64_t>(c.action_count()));
                orders[i][j] = action_quantity(c.action_multipliers[pick], o.mean_demand);
            }
        }
        return orders;
    };
}

namespace {

/// Single-SKU copy of the scenario used while fitting: unconstrained
/// capacity, horizon equal to the training segment.
ScenarioConfig fitting_scenario(const ScenarioConfig& scenario, int sku, int horizon) {
    ScenarioConfig fit = scenario;
    fit.skus = 1;
    fit.capacity_per_echelon = kUnlimitedCapacity;
    fit.horizon = horizon;
    fit.lead_time.assign(static_cast<std::size_t>(scenario.echelons), {0});
    for (int e = 0; e < scenario.echelons; ++e) fit.lead_time[e][0] = scenario.lead(e, sku);
    fit.demand_source = SyntheticDemandSpec{};  // unused; trace passed directly
    return fit;
}

double simulate_profit(const ScenarioConfig& fit, const DemandTrace& trace,
                       const OrderFn& policy) {
    InventoryEnv env(fit, trace);
    return rollout_policy(env, Segment::Train, 0, policy).component_totals.total.to_f64();
}

Units z_search_bound(const DemandTrace& trace, const ScenarioConfig& scenario, int echelon,
                     int sku) {
    Units max_demand = 0;
    for (int t = 0; t < trace.train_steps(); ++t) max_demand = std::max(max_demand, trace.at(0, t));
    return static_cast<Units>(
        std::ceil(static_cast<double>(max_demand) *
                  (scenario.lead(echelon, sku) + scenario.demand_window)));
}

/// Coordinate search of per-echelon base-stock levels on the single-SKU
/// simulator; two passes from the top echelon down.
std::vector<Units> fit_base_stock_single(const DemandTrace& sku_trace,
                                         const ScenarioConfig& scenario, int sku) {
    const int train_len = sku_trace.train_steps();
    const ScenarioConfig fit = fitting_scenario(scenario, sku, train_len);
    const int echelons = scenario.echelons;

    std::vector<Units> levels(static_cast<std::size_t>(echelons), 0);
    for (int e = 0; e < echelons; ++e) {
        // initial guess: cover the replenishment delay plus one window
        const double mean = [&] {
            double sum = 0;
            for (int t = 0; t < train_len; ++t) sum += static_cast<double>(sku_trace.at(0, t));
            return sum / std::max(1, train_len);
        }();
        levels[static_cast<std::size_t>(e)] =
            static_cast<Units>(std::llround(mean * (scenario.lead(e, sku) + 2)));
    }

    BaseStockPolicy trial;
    trial.z.assign(static_cast<std::size_t>(echelons), {0});
    auto profit_with = [&](const std::vector<Units>& zs) {
        for (int e = 0; e < echelons; ++e) trial.z[static_cast<std::size_t>(e)][0] = zs[e];
        return simulate_profit(fit, sku_trace, base_stock_order_fn(trial));
    };

    const int passes = echelons > 1 ? 2 : 1;
    for (int pass = 0; pass < passes; ++pass) {
        for (int e = echelons - 1; e >= 0; --e) {
            const Units bound = z_search_bound(sku_trace, scenario, e, sku);
            Units best_z = 0;
            double best_profit = -std::numeric_limits<double>::infinity();
            std::vector<Units> zs = levels;
            for (Units z = 0; z <= bound; ++z) {
                zs[static_cast<std::size_t>(e)] = z;
                const double profit = profit_with(zs);
                if (profit > best_profit) {
                    best_profit = profit;
                    best_z = z;
                }
            }
            levels[static_cast<std::size_t>(e)] = best_z;
        }
    }
    return levels;
}

std::pair<Units, Units> fit_ss_single_echelon(const DemandTrace& sku_trace,
                                              const ScenarioConfig& fit, int echelon,
                                              std::vector<std::pair<Units, Units>>& levels,
                                              Units bound) {
    SsPolicy trial;
    const int echelons = static_cast<int>(levels.size());
    trial.small_s.assign(static_cast<std::size_t>(echelons), {0});
    trial.big_s.assign(static_cast<std::size_t>(echelons), {0});
    auto profit_with = [&](Units s, Units S) {
        for (int e = 0; e < echelons; ++e) {
            trial.small_s[static_cast<std::size_t>(e)][0] =
                e == echelon ? s : levels[static_cast<std::size_t>(e)].first;
            trial.big_s[static_cast<std::size_t>(e)][0] =
                e == echelon ? S : levels[static_cast<std::size_t>(e)].second;
        }
        return simulate_profit(fit, sku_trace, ss_order_fn(trial));
    };

    const Units coarse = std::max<Units>(1, bound / 10);
    double best_profit = -std::numeric_limits<double>::infinity();
    Units best_s = 0, best_S = 0;
    auto consider = [&](Units s, Units S) {
        const double profit = profit_with(s, S);
        if (profit > best_profit ||
            (profit == best_profit && (S < best_S || (S == best_S && s < best_s)))) {
            best_profit = profit;
            best_s = s;
            best_S = S;
        }
    };
    for (Units S = 0; S <= bound; S += coarse)
        for (Units s = 0; s <= S; s += coarse) consider(s, S);
    const Units s_lo = std::max<Units>(0, best_s - coarse);
    const Units s_hi = std::min(bound, best_s + coarse);
    const Units S_lo = std::max<Units>(0, best_S - coarse);
    const Units S_hi = std::min(bound, best_S + coarse);
    for (Units S = S_lo; S <= S_hi; ++S)
        for (Units s = s_lo; s <= std::min(S, s_hi); ++s) consider(s, S);
    return {best_s, best_S};
}

std::vector<std::pair<Units, Units>> fit_ss_single(const DemandTrace& sku_trace,
                                                   const ScenarioConfig& scenario, int sku) {
    const int train_len = sku_trace.train_steps();
    const ScenarioConfig fit = fitting_scenario(scenario, sku, train_len);
    const int echelons = scenario.echelons;
    std::vector<std::pair<Units, Units>> levels(static_cast<std::size_t>(echelons), {0, 0});
    const int passes = echelons > 1 ? 2 : 1;
    for (int pass = 0; pass < passes; ++pass) {
        for (int e = echelons - 1; e >= 0; --e) {
            const Units bound = z_search_bound(sku_trace, scenario, e, sku);
            levels[static_cast<std::size_t>(e)] =
                fit_ss_single_echelon(sku_trace, fit, e, levels, bound);
        }
    }
    return levels;
}

template <typename Fn>
void parallel_over_skus(int skus, Fn&& fn) {
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> futures;
    std::atomic<int> next{0};
    for (unsigned w = 0; w < std::min<unsigned>(workers, static_cast<unsigned>(skus)); ++w) {
        futures.push_back(std::async(std::launch::async, [&]() {
            for (int j = next.fetch_add(1); j < skus; j = next.fetch_add(1)) fn(j);
        }));
    }
    for (auto& f : futures) f.get();
}

}  // namespace

BaseStockPolicy fit_base_stock(const DemandTrace& train, const ScenarioConfig& scenario) {
    if (train.train_steps() < 1) throw std::invalid_argument("empty training segment");
    BaseStockPolicy policy;
    policy.z.assign(static_cast<std::size_t>(scenario.echelons),
                    std::vector<Units>(static_cast<std::size_t>(scenario.skus), 0));
    parallel_over_skus(scenario.skus, [&](int j) {
        const DemandTrace sku_trace = train.single_sku(j);
        const std::vector<Units> levels = fit_base_stock_single(sku_trace, scenario, j);
        for (int e = 0; e < scenario.echelons; ++e)
            policy.z[static_cast<std::size_t>(e)][static_cast<std::size_t>(j)] =
                levels[static_cast<std::size_t>(e)];
    });
    return policy;
}

SsPolicy fit_ss(const DemandTrace& train, const ScenarioConfig& scenario) {
    if (train.train_steps() < 1) throw std::invalid_argument("empty training segment");
    SsPolicy policy;
    policy.small_s.assign(static_cast<std::size_t>(scenario.echelons),
                          std::vector<Units>(static_cast<std::size_t>(scenario.skus), 0));
    policy.big_s = policy.small_s;
    parallel_over_skus(scenario.skus, [&](int j) {
        const DemandTrace sku_trace = train.single_sku(j);
        const auto levels = fit_ss_single(sku_trace, scenario, j);
        for (int e = 0; e < scenario.echelons; ++e) {
            policy.small_s[static_cast<std::size_t>(e)][static_cast<std::size_t>(j)] =
                levels[static_cast<std::size_t>(e)].first;
            policy.big_s[static_cast<std::size_t>(e)][static_cast<std::size_t>(j)] =
                levels[static_cast<std::size_t>(e)].second;
        }
    });
    return policy;
}

OrderFn dynamic_base_stock_fn(const DemandTrace& train, const ScenarioConfig& scenario,
                              DynamicBaseStockConfig config) {
    if (config.refit_period < 1) throw std::invalid_argument("refit_period must be >= 1");
    struct State {
        BaseStockPolicy current;
        int fitted_at_step = -1;
    };
    auto state = std::make_shared<State>();
    auto train_copy = std::make_shared<DemandTrace>(train);
    auto cfg = config;

    return [state, train_copy, cfg, scenario](const InventoryEnv& env,
                                              const std::vector<Observation>& obs,
                                              const std::vector<std::vector<Units>>& pending) {
        const int step = env.state().step;
        const bool need_refit =
            state->fitted_at_step < 0 || (step - state->fitted_at_step) >= cfg.refit_period;
        if (need_refit) {
            // trailing window: realized demand this episode, padded with
            // the tail of the training segment
            std::vector<std::vector<Units>> window(static_cast<std::size_t>(scenario.skus));
            std::vector<std::vector<Units>> realized(static_cast<std::size_t>(scenario.skus));
            for (const LedgerRow& row : env.ledger().rows)
                if (row.echelon == 0) realized[static_cast<std::size_t>(row.sku)].push_back(row.demand);
            for (int j = 0; j < scenario.skus; ++j) {
                auto& w = window[static_cast<std::size_t>(j)];
                const auto& r = realized[static_cast<std::size_t>(j)];
                const int from_episode = std::min<int>(cfg.window, static_cast<int>(r.size()));
                const int from_train = cfg.window - from_episode;
                for (int t = train_copy->train_steps() - from_train; t < train_copy->train_steps();
                     ++t)
                    w.push_back(train_copy->at(j, std::max(0, t)));
                for (int t = static_cast<int>(r.size()) - from_episode;
                     t < static_cast<int>(r.size()); ++t)
                    w.push_back(r[static_cast<std::size_t>(t)]);
            }
            DemandTrace window_trace(std::move(window), cfg.window);
            state->current = fit_base_stock(window_trace, scenario);
            state->fitted_at_step = step;
        }
        return base_stock_order_fn(state->current)(env, obs, pending);
    };
}

ActionMask random_pruning_mask(SeededRng& rng, double p, int action_count) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("pruning probability must be in [0, 1)");
    for (int attempt = 0; attempt < 2; ++attempt) {
        ActionMask mask;
        mask.allow.resize(static_cast<std::size_t>(action_count));
        bool any = false;
        for (int a = 0; a < action_count; ++a) {
            const bool keep = rng.uniform01() >= p;
            mask.allow[static_cast<std::size_t>(a)] = keep;
            any = any || keep;
        }
        if (any) return mask;
    }
    return ActionMask::all_allow(action_count);
}

ActionMask ss_pruning_mask(const Observation& obs, const SsPolicy& policy,
                           const std::vector<double>& action_multipliers, double r1, double r2) {
    const Units s = policy.small_s[static_cast<std::size_t>(obs.echelon_index)]
                                  [static_cast<std::size_t>(obs.sku_index)];
    const Units S = policy.big_s[static_cast<std::size_t>(obs.echelon_index)]
                                [static_cast<std::size_t>(obs.sku_index)];
    const Units position = obs.in_stock + obs.in_transit;
    const Units delta = position < s ? S - s : 0;

    ActionMask mask;
    mask.allow.assign(action_multipliers.size(), false);
    if (delta <= 0) {
        mask.allow[0] = true;  // only no-order
        return mask;
    }
    const double lo = r1 * static_cast<double>(delta);
    const double hi = r2 * static_cast<double>(delta);
    bool any = false;
    for (std::size_t a = 0; a < action_multipliers.size(); ++a) {
        const double quantity =
            static_cast<double>(action_quantity(action_multipliers[a], obs.mean_demand));
        if (quantity >= lo && quantity <= hi) {
            mask.allow[a] = true;
            any = true;
        }
    }
    if (!any) {
        // no grid quantity lands in the band; keep the one closest to delta
        std::size_t best = 0;
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < action_multipliers.size(); ++a) {
            const double gap = std::abs(
                static_cast<double>(action_quantity(action_multipliers[a], obs.mean_demand)) -
                static_cast<double>(delta));
            if (gap < best_gap) {
                best_gap = gap;
                best = a;
            }
        }
        mask.allow[best] = true;
    }
    return mask;
}

ActionMask upbound_pruning_mask(const Observation& obs, const ScenarioConfig& scenario) {
    const Units share = scenario.capacity_per_echelon / std::max(1, scenario.skus);
    ActionMask mask;
    mask.allow.assign(scenario.action_multipliers.size(), false);
    mask.allow[0] = true;
    for (std::size_t a = 1; a < scenario.action_multipliers.size(); ++a) {
        const Units quantity = action_quantity(scenario.action_multipliers[a], obs.mean_demand);
        mask.allow[a] = quantity + obs.in_stock + obs.in_transit <= share;
    }
    return mask;
}

std::string base_stock_to_json(const BaseStockPolicy& policy) {
    nlohmann::json j;
    j["type"] = "base_stock";
    j["z"] = policy.z;
    return j.dump(2) + "\n";
}

BaseStockPolicy base_stock_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    BaseStockPolicy p;
    p.z = j.at("z").get<std::vector<std::vector<Units>>>();
    return p;
}

std::string ss_to_json(const SsPolicy& policy) {
    nlohmann::json j;
    j["type"] = "ss";
    j["s"] = policy.small_s;
    j["S"] = policy.big_s;
    return j.dump(2) + "\n";
}

SsPolicy ss_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SsPolicy p;
    p.small_s = j.at("s").get<std::vector<std::vector<Units>>>();
    p.big_s = j.at("S").get<std::vector<std::vector<Units>>>();
    return p;
}

}  // namespace espark
