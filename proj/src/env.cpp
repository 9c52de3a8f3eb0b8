#include "espark/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace espark {

namespace {

Units rationed_floor(Units amount, Units free_capacity, Units total_arrivals) {
    // floor(amount * gamma) with gamma = min(free/total, 1) kept in
    // integer arithmetic so the result is exact.
    if (total_arrivals <= 0) return amount;
    if (free_capacity >= total_arrivals) return amount;
    if (free_capacity <= 0) return 0;
    const __int128 scaled = static_cast<__int128>(amount) * free_capacity;
    return static_cast<Units>(scaled / total_arrivals);
}

}  // namespace

InventoryEnv::InventoryEnv(ScenarioConfig config, DemandTrace trace)
    : config_(std::move(config)), trace_(std::move(trace)) {
    config_.validate();
    if (trace_.skus() != config_.skus)
        throw std::invalid_argument("demand trace SKU count does not match scenario");
    if (trace_.length() < config_.horizon)
        throw std::invalid_argument("demand trace shorter than horizon");
}

int InventoryEnv::trace_base(Segment segment) const {
    return segment == Segment::Train ? 0 : trace_.train_steps();
}

int InventoryEnv::offset_count(Segment segment) const {
    const int span = segment == Segment::Train ? trace_.train_steps()
                                               : trace_.length() - trace_.train_steps();
    return std::max(0, span - config_.horizon + 1);
}

std::vector<Observation> InventoryEnv::reset(Segment segment, int offset) {
    if (offset < 0 || offset_count(segment) <= offset)
        throw std::invalid_argument("episode offset outside demand segment");
    segment_ = segment;
    offset_ = trace_base(segment) + offset;

    const int e = config_.echelons;
    const int k = config_.skus;
    state_ = WarehouseState{};
    state_.in_stock.assign(e, std::vector<Units>(k, 0));
    state_.pipeline.assign(e, std::vector<std::vector<PipelineEntry>>(k));
    state_.demand_now.assign(e, std::vector<Units>(k, 0));
    state_.pending_vendor.assign(k, 0);
    state_.step = 0;
    flows_.assign(e, std::vector<FlowCounters>(k));
    ledger_.clear();

    // Demand history warm-start: the first in-window slice of the trace
    // seeds every echelon's sliding mean, mirroring the initial-stock rule.
    history_.assign(e, std::vector<std::vector<Units>>(k));
    const int window = std::min(config_.demand_window, config_.horizon);
    for (int j = 0; j < k; ++j) {
        std::vector<Units> warm(window);
        Units sum = 0;
        for (int t = 0; t < window; ++t) {
            warm[t] = trace_.at(j, offset_ + t);
            sum += warm[t];
        }
        const double mean = static_cast<double>(sum) / window;
        const Units initial = std::llround(config_.demand_window * mean);
        for (int i = 0; i < e; ++i) {
            history_[i][j] = warm;
            state_.in_stock[i][j] = initial;
        }
    }
    // Scale initial stock down where it would overflow the warehouse.
    for (int i = 0; i < e; ++i) {
        const Units total = state_.echelon_stock(i);
        if (total > config_.capacity_per_echelon) {
            for (int j = 0; j < k; ++j) {
                state_.in_stock[i][j] =
                    rationed_floor(state_.in_stock[i][j], config_.capacity_per_echelon, total);
            }
        }
    }
    // Step-0 demand at the customer echelon comes straight off the trace.
    for (int j = 0; j < k; ++j) state_.demand_now[0][j] = trace_.at(j, offset_);

    episode_active_ = true;
    return observe_all();
}

Observation InventoryEnv::observe(int echelon, int sku) const {
    Observation o;
    o.in_stock = state_.in_stock[echelon][sku];
    o.in_transit = state_.in_transit(echelon, sku);
    const auto& h = history_[echelon][sku];
    const Units hist_sum = std::accumulate(h.begin(), h.end(), Units{0});
    o.mean_demand = h.empty() ? 0.0 : static_cast<double>(hist_sum) / static_cast<double>(h.size());
    o.last_demand = h.empty() ? 0 : h.back();
    o.unit_price = config_.unit_price;
    o.unit_cost = config_.unit_cost;
    o.holding_cost_rate = config_.holding_cost;
    o.backlog_cost_rate = config_.backlog_cost;
    o.capacity_remaining = config_.capacity_per_echelon - state_.echelon_stock(echelon);
    o.echelon_index = echelon;
    o.sku_index = sku;
    o.step_fraction = static_cast<double>(state_.step) / config_.horizon;
    return o;
}

std::vector<Observation> InventoryEnv::observe_all() const {
    std::vector<Observation> obs;
    obs.reserve(static_cast<std::size_t>(config_.agent_count()));
    for (int i = 0; i < config_.echelons; ++i)
        for (int j = 0; j < config_.skus; ++j) obs.push_back(observe(i, j));
    return obs;
}

StepResult InventoryEnv::step(const std::vector<std::vector<Units>>& orders) {
    if (!episode_active_ || done()) throw EpisodeFinishedError{};
    const int e = config_.echelons;
    const int k = config_.skus;
    if (static_cast<int>(orders.size()) != e)
        throw std::invalid_argument("orders must have one row per echelon");
    for (const auto& row : orders) {
        if (static_cast<int>(row.size()) != k)
            throw std::invalid_argument("orders rows must have one entry per sku");
        for (Units q : row)
            if (q < 0) throw std::invalid_argument("orders must be nonnegative");
    }
    const int t = state_.step;
    const std::vector<std::vector<Units>> demand_served = state_.demand_now;

    // Sell: every echelon serves its current demand from on-hand stock;
    // the virtual vendor above the top echelon always ships in full.
    std::vector<std::vector<Units>> sold(e, std::vector<Units>(k));
    for (int i = 0; i < e; ++i)
        for (int j = 0; j < k; ++j)
            sold[i][j] = std::min(demand_served[i][j], state_.in_stock[i][j]);

    // Goods sold this step enter the buyer's pipeline.
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i + 1 < e; ++i) {
            if (sold[i + 1][j] > 0) {
                state_.pipeline[i][j].push_back({t + config_.lead(i, j), sold[i + 1][j]});
                flows_[i][j].shipped_in += sold[i + 1][j];
            }
        }
        if (state_.pending_vendor[j] > 0) {
            state_.pipeline[e - 1][j].push_back({t + config_.lead(e - 1, j), state_.pending_vendor[j]});
            flows_[e - 1][j].shipped_in += state_.pending_vendor[j];
        }
    }

    // Arrive: pop pipeline entries due now.
    std::vector<std::vector<Units>> arrived(e, std::vector<Units>(k, 0));
    for (int i = 0; i < e; ++i) {
        for (int j = 0; j < k; ++j) {
            auto& queue = state_.pipeline[i][j];
            for (auto it = queue.begin(); it != queue.end();) {
                if (it->arrival_step == t) {
                    arrived[i][j] += it->quantity;
                    it = queue.erase(it);
                } else {
                    ++it;
                }
            }
        }
    }

    // Receive: proportional rationing against remaining shared capacity.
    std::vector<std::vector<Units>> received(e, std::vector<Units>(k, 0));
    for (int i = 0; i < e; ++i) {
        const Units stock_total = state_.echelon_stock(i);
        const Units arrivals_total =
            std::accumulate(arrived[i].begin(), arrived[i].end(), Units{0});
        const Units free_capacity = config_.capacity_per_echelon - stock_total;
        for (int j = 0; j < k; ++j) {
            received[i][j] = rationed_floor(arrived[i][j], free_capacity, arrivals_total);
            flows_[i][j].arrived += arrived[i][j];
            flows_[i][j].received += received[i][j];
            flows_[i][j].discarded += arrived[i][j] - received[i][j];
        }
    }

    StepResult result;
    result.rewards.reserve(static_cast<std::size_t>(e) * k);
    ledger_.steps += 1;
    for (int i = 0; i < e; ++i) {
        for (int j = 0; j < k; ++j) {
            const Units d = demand_served[i][j];
            const Units s = sold[i][j];
            const Units r = orders[i][j];

            state_.in_stock[i][j] += received[i][j] - s;

            const Money sales = (i == 0 ? config_.unit_price : config_.unit_cost) * s;
            const Money order =
                r > 0 ? config_.order_fixed_cost + config_.unit_cost * r : Money::zero();
            const Money holding = config_.holding_cost * state_.in_stock[i][j];
            const Money backlog = config_.backlog_cost * (d - s);
            const Money excess = config_.overflow_cost * (arrived[i][j] - received[i][j]);
            RewardBreakdown reward = RewardBreakdown::make(sales, order, holding, backlog, excess);
            result.rewards.push_back(reward);
            result.team_reward += reward.total;

            ledger_.rows.push_back({t, i, j, d, s, r, arrived[i][j], received[i][j],
                                    state_.in_stock[i][j], reward});
            ledger_.component_totals += reward;
            if (i == 0) {
                ledger_.demand_echelon0 += d;
                ledger_.sold_echelon0 += s;
            }
            ledger_.arrived_total += arrived[i][j];
            ledger_.received_total += received[i][j];
        }
    }

    // Replenish staging: this step's orders become upstream demand next
    // step; the top echelon's orders go to the vendor.
    for (int i = 1; i < e; ++i)
        for (int j = 0; j < k; ++j) state_.demand_now[i][j] = orders[i - 1][j];
    for (int j = 0; j < k; ++j) state_.pending_vendor[j] = orders[e - 1][j];

    // Record served demand into each agent's sliding window.
    for (int i = 0; i < e; ++i) {
        for (int j = 0; j < k; ++j) {
            auto& h = history_[i][j];
            h.push_back(demand_served[i][j]);
            if (static_cast<int>(h.size()) > config_.demand_window) h.erase(h.begin());
        }
    }

    state_.step = t + 1;
    if (state_.step < config_.horizon) {
        for (int j = 0; j < k; ++j) state_.demand_now[0][j] = trace_.at(j, offset_ + state_.step);
    }
    result.done = done();
    result.observations = observe_all();
    return result;
}

EpisodeMetrics metrics(const EpisodeLedger& ledger) {
    EpisodeMetrics m;
    m.total_profit = ledger.component_totals.total;
    m.fulfillment_ratio =
        ledger.demand_echelon0 == 0
            ? 1.0
            : static_cast<double>(ledger.sold_echelon0) / static_cast<double>(ledger.demand_echelon0);
    m.overflow_ratio =
        ledger.arrived_total == 0
            ? 0.0
            : static_cast<double>(ledger.arrived_total - ledger.received_total) /
                  static_cast<double>(ledger.arrived_total);
    m.profit_per_step =
        ledger.steps == 0 ? 0.0 : m.total_profit.to_f64() / static_cast<double>(ledger.steps);
    return m;
}

std::string ledger_to_csv(const EpisodeLedger& ledger) {
    std::ostringstream out;
    out << "step,echelon,sku,demand,sold,ordered,arrived,received,stock_after,"
           "sales_profit,order_cost,holding_cost,backlog_cost,excess_cost,total\n";
    for (const auto& r : ledger.rows) {
        out << r.step << ',' << r.echelon << ',' << r.sku << ',' << r.demand << ',' << r.sold
            << ',' << r.ordered << ',' << r.arrived << ',' << r.received << ',' << r.stock_after
            << ',' << r.reward.sales_profit.to_string() << ',' << r.reward.order_cost.to_string()
            << ',' << r.reward.holding_cost.to_string() << ',' << r.reward.backlog_cost.to_string()
            << ',' << r.reward.excess_cost.to_string() << ',' << r.reward.total.to_string() << '\n';
    }
    return out.str();
}

}  // namespace espark
