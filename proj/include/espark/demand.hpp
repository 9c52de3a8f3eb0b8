#pragma once

#include <string>
#include <vector>

#include "espark/rng.hpp"
#include "espark/types.hpp"

namespace espark {

/// Per-SKU demand series with a train/test split. The test segment is
/// the tail and is only touched by evaluation episodes.
class DemandTrace {
public:
    DemandTrace() = default;
    DemandTrace(std::vector<std::vector<Units>> per_sku, int train_steps);

    int skus() const { return static_cast<int>(series_.size()); }
    int length() const { return series_.empty() ? 0 : static_cast<int>(series_[0].size()); }
    int train_steps() const { return train_steps_; }
    int test_steps() const { return length() - train_steps_; }

    Units at(int sku, int step) const { return series_[sku][step]; }
    const std::vector<Units>& sku_series(int sku) const { return series_[sku]; }

    /// Largest single-step demand across all SKUs and steps.
    Units max_demand() const;

    /// A trace restricted to one SKU (used by per-SKU policy fitting).
    DemandTrace single_sku(int sku) const;

private:
    std::vector<std::vector<Units>> series_;  // [sku][step]
    int train_steps_ = 0;
};

/// Generates demand_t = max(0, round(base + amplitude*sin(2*pi*t/period) +
/// Normal(0, noise))) per SKU; SKU k uses rng stream (base stream + k).
DemandTrace synth_demand(const SyntheticDemandSpec& spec, int skus, const SeededRng& rng);

/// Loads the one-column-per-SKU CSV format (header row of SKU ids).
DemandTrace load_demand_csv(const std::string& path, int horizon, int train_steps);

/// Resolves a scenario's demand source into a concrete trace.
DemandTrace resolve_demand(const ScenarioConfig& config, const SeededRng& rng);

}  // namespace espark
