#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "espark/money.hpp"

namespace espark {

using Units = std::int64_t;

/// Large-enough shared-capacity value that the Receive rationing never
/// binds; scenario files set real capacities explicitly.
inline constexpr Units kUnlimitedCapacity = 1'000'000'000'000;

/// Synthetic demand generator: base + amplitude * sin(2*pi*t/period) + noise.
struct SyntheticDemandSpec {
    double base = 4.0;
    double amplitude = 0.0;
    double period = 28.0;
    double noise = 0.0;
    int length = 500;
    int train_steps = 400;
};

struct CsvDemandSpec {
    std::string path;
    int train_steps = -1;  // -1: everything but the final horizon window
};

using DemandSource = std::variant<SyntheticDemandSpec, CsvDemandSpec>;

/// One inventory task: echelon/SKU layout, capacities, costs, demand.
struct ScenarioConfig {
    std::string name = "scenario";
    int echelons = 1;
    int skus = 1;
    Units capacity_per_echelon = kUnlimitedCapacity;
    int horizon = 100;
    std::vector<std::vector<int>> lead_time;  // [echelon][sku]
    Money unit_price = Money::from_raw(2 * Money::kScale);
    Money unit_cost = Money::from_raw(1 * Money::kScale);
    Money holding_cost = Money::from_f64(0.05);
    Money backlog_cost = Money::from_f64(0.5);
    Money overflow_cost = Money::from_f64(1.0);
    Money order_fixed_cost = Money::from_f64(0.2);
    DemandSource demand_source = SyntheticDemandSpec{};
    std::vector<double> action_multipliers = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
    int demand_window = 7;

    int action_count() const { return static_cast<int>(action_multipliers.size()); }
    int agent_count() const { return echelons * skus; }

    int lead(int echelon, int sku) const { return lead_time[echelon][sku]; }

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

/// Per-agent view of the world at one step.
struct Observation {
    Units in_stock = 0;
    Units in_transit = 0;
    double mean_demand = 0.0;
    Units last_demand = 0;
    Money unit_price;
    Money unit_cost;
    Money holding_cost_rate;
    Money backlog_cost_rate;
    Units capacity_remaining = 0;
    int echelon_index = 0;
    int sku_index = 0;
    double step_fraction = 0.0;
};

/// Replenishment quantity for one action choice: multiplier times the
/// sliding-window mean demand, rounded to whole units.
inline Units action_quantity(double multiplier, double mean_demand) {
    return static_cast<Units>(std::llround(multiplier * mean_demand));
}

/// Binary allow/deny vector over the action grid.
struct ActionMask {
    std::vector<bool> allow;

    static ActionMask all_allow(int n) {
        ActionMask m;
        m.allow.assign(static_cast<std::size_t>(n), true);
        return m;
    }

    int size() const { return static_cast<int>(allow.size()); }
    bool any() const {
        for (bool b : allow)
            if (b) return true;
        return false;
    }
    int allowed_count() const {
        int c = 0;
        for (bool b : allow) c += b ? 1 : 0;
        return c;
    }
};

/// Reward components for one agent-step; total is derived, never stored
/// out of sync with the parts.
struct RewardBreakdown {
    Money sales_profit;
    Money order_cost;
    Money holding_cost;
    Money backlog_cost;
    Money excess_cost;
    Money total;

    static RewardBreakdown make(Money sales, Money order, Money holding, Money backlog,
                                Money excess) {
        RewardBreakdown r;
        r.sales_profit = sales;
        r.order_cost = order;
        r.holding_cost = holding;
        r.backlog_cost = backlog;
        r.excess_cost = excess;
        r.total = sales - order - holding - backlog - excess;
        return r;
    }

    Money recomputed_total() const {
        return sales_profit - order_cost - holding_cost - backlog_cost - excess_cost;
    }

    RewardBreakdown& operator+=(const RewardBreakdown& o) {
        sales_profit += o.sales_profit;
        order_cost += o.order_cost;
        holding_cost += o.holding_cost;
        backlog_cost += o.backlog_cost;
        excess_cost += o.excess_cost;
        total += o.total;
        return *this;
    }
};

inline void ScenarioConfig::validate() const {
    if (echelons < 1) throw std::invalid_argument("echelons must be >= 1");
    if (skus < 1) throw std::invalid_argument("skus must be >= 1");
    if (capacity_per_echelon < 0) throw std::invalid_argument("capacity_per_echelon must be >= 0");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (demand_window < 1) throw std::invalid_argument("demand_window must be >= 1");
    if (action_multipliers.empty() || action_multipliers.front() != 0.0)
        throw std::invalid_argument("action_multipliers must start at 0");
    for (std::size_t i = 1; i < action_multipliers.size(); ++i) {
        if (action_multipliers[i] < action_multipliers[i - 1])
            throw std::invalid_argument("action_multipliers must be sorted ascending");
        if (action_multipliers[i] < 0.0)
            throw std::invalid_argument("action_multipliers must be nonnegative");
    }
    if (lead_time.size() != static_cast<std::size_t>(echelons))
        throw std::invalid_argument("lead_time must have one row per echelon");
    for (const auto& row : lead_time) {
        if (row.size() != static_cast<std::size_t>(skus))
            throw std::invalid_argument("lead_time rows must have one entry per sku");
        for (int l : row)
            if (l < 0) throw std::invalid_argument("lead times must be >= 0");
    }
    if (const auto* synth = std::get_if<SyntheticDemandSpec>(&demand_source)) {
        if (synth->base < 0 || synth->amplitude < 0 || synth->noise < 0)
            throw std::invalid_argument("synthetic demand parameters must be >= 0");
        if (synth->period <= 0) throw std::invalid_argument("synthetic demand period must be > 0");
        if (synth->length < horizon)
            throw std::invalid_argument("synthetic demand length must cover the horizon");
    }
}

}  // namespace espark
