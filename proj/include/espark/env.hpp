#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "espark/demand.hpp"
#include "espark/rng.hpp"
#include "espark/types.hpp"

namespace espark {

class EpisodeFinishedError : public std::logic_error {
public:
    EpisodeFinishedError() : std::logic_error("episode already finished") {}
};

/// Shipment sitting in a warehouse's inbound pipeline.
struct PipelineEntry {
    int arrival_step;
    Units quantity;
};

/// Mutable simulation state for one episode.
struct WarehouseState {
    std::vector<std::vector<Units>> in_stock;                   // [echelon][sku]
    std::vector<std::vector<std::vector<PipelineEntry>>> pipeline;  // [echelon][sku]
    std::vector<std::vector<Units>> demand_now;                 // D^t per (echelon, sku)
    std::vector<Units> pending_vendor;                          // top-echelon orders awaiting the vendor
    int step = 0;

    Units in_transit(int echelon, int sku) const {
        Units sum = 0;
        for (const auto& e : pipeline[echelon][sku]) sum += e.quantity;
        return sum;
    }
    Units echelon_stock(int echelon) const {
        Units sum = 0;
        for (Units v : in_stock[echelon]) sum += v;
        return sum;
    }
};

/// Per-(echelon, sku) cumulative flow counters; the conservation
/// identity shipped == in pipeline + arrived and arrived == received +
/// discarded holds exactly at every step.
struct FlowCounters {
    Units shipped_in = 0;
    Units arrived = 0;
    Units received = 0;
    Units discarded = 0;
};

/// One agent-step row of the episode ledger.
struct LedgerRow {
    int step;
    int echelon;
    int sku;
    Units demand;
    Units sold;
    Units ordered;
    Units arrived;
    Units received;
    Units stock_after;
    RewardBreakdown reward;
};

struct EpisodeMetrics {
    double fulfillment_ratio = 1.0;
    double overflow_ratio = 0.0;
    double profit_per_step = 0.0;
    Money total_profit;
};

/// Episode-wide accounting used for metrics, feedback, and CSV export.
struct EpisodeLedger {
    std::vector<LedgerRow> rows;
    RewardBreakdown component_totals;
    Units demand_echelon0 = 0;
    Units sold_echelon0 = 0;
    Units arrived_total = 0;
    Units received_total = 0;
    int steps = 0;

    void clear() { *this = EpisodeLedger{}; }
};

EpisodeMetrics metrics(const EpisodeLedger& ledger);

struct StepResult {
    std::vector<RewardBreakdown> rewards;  // per agent, flattened echelon-major
    std::vector<Observation> observations;
    Money team_reward;  // sum of per-agent totals
    bool done = false;
};

/// Which slice of the demand trace an episode runs on.
enum class Segment { Train, Test };

/// Multi-echelon, multi-SKU inventory game. Orders flow upstream,
/// goods flow downstream with lead times; all echelons of one SKU plus
/// the shared warehouse capacities couple the agents.
///
/// Step phases, in order: Replenish (orders placed last step surface as
/// upstream demand), Sell (S = min(D, I), the top echelon is served by
/// an unconstrained vendor), Arrive (pipeline entries due this step),
/// Receive (proportional rationing gamma = min((W - sum I)/sum A, 1),
/// B = floor(A * gamma)), Update (I <- I - S + B). Arrivals in excess
/// of capacity are discarded and billed at the overflow rate.
class InventoryEnv {
public:
    InventoryEnv(ScenarioConfig config, DemandTrace trace);

    /// Starts an episode whose demand window begins at `offset` within
    /// the chosen segment. Initial stock is round(demand_window * mean
    /// of the first in-window demand), scaled down when it would exceed
    /// warehouse capacity; the pipeline starts empty.
    std::vector<Observation> reset(Segment segment, int offset = 0);

    StepResult step(const std::vector<std::vector<Units>>& orders);

    const ScenarioConfig& config() const { return config_; }
    const DemandTrace& trace() const { return trace_; }
    const WarehouseState& state() const { return state_; }
    const EpisodeLedger& ledger() const { return ledger_; }
    const std::vector<std::vector<FlowCounters>>& flows() const { return flows_; }

    int agent_index(int echelon, int sku) const { return echelon * config_.skus + sku; }
    bool done() const { return state_.step >= config_.horizon; }

    /// Number of distinct episode offsets available in a segment.
    int offset_count(Segment segment) const;

    Observation observe(int echelon, int sku) const;
    std::vector<Observation> observe_all() const;

private:
    int trace_base(Segment segment) const;

    ScenarioConfig config_;
    DemandTrace trace_;
    WarehouseState state_;
    EpisodeLedger ledger_;
    std::vector<std::vector<FlowCounters>> flows_;         // [echelon][sku]
    std::vector<std::vector<std::vector<Units>>> history_; // demand window per (echelon, sku)
    Segment segment_ = Segment::Train;
    int offset_ = 0;
    bool episode_active_ = false;
};

/// Writes the ledger in the documented CSV schema.
std::string ledger_to_csv(const EpisodeLedger& ledger);

}  // namespace espark
