#include "espark/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace espark {

DemandTrace::DemandTrace(std::vector<std::vector<Units>> per_sku, int train_steps)
    : series_(std::move(per_sku)), train_steps_(train_steps) {
    if (series_.empty()) throw std::invalid_argument("demand trace needs at least one SKU");
    const std::size_t len = series_[0].size();
    for (const auto& s : series_) {
        if (s.size() != len) throw std::invalid_argument("demand series lengths differ");
        for (Units d : s)
            if (d < 0) throw std::invalid_argument("demand must be nonnegative");
    }
    if (train_steps_ < 0 || train_steps_ > static_cast<int>(len))
        throw std::invalid_argument("train_steps out of range");
}

Units DemandTrace::max_demand() const {
    Units m = 0;
    for (const auto& s : series_)
        for (Units d : s) m = std::max(m, d);
    return m;
}

DemandTrace DemandTrace::single_sku(int sku) const {
    return DemandTrace({series_.at(sku)}, train_steps_);
}

DemandTrace synth_demand(const SyntheticDemandSpec& spec, int skus, const SeededRng& rng) {
    if (spec.period <= 0) throw std::invalid_argument("synthetic demand period must be > 0");
    if (spec.base < 0 || spec.amplitude < 0 || spec.noise < 0)
        throw std::invalid_argument("synthetic demand parameters must be >= 0");
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    std::vector<std::vector<Units>> series(skus);
    for (int k = 0; k < skus; ++k) {
        SeededRng sku_rng = rng.fork(rng.stream_id() + static_cast<std::uint64_t>(k));
        series[k].resize(spec.length);
        for (int t = 0; t < spec.length; ++t) {
            double v = spec.base + spec.amplitude * std::sin(kTwoPi * t / spec.period);
            if (spec.noise > 0) v += sku_rng.normal(0.0, spec.noise);
            series[k][t] = std::max<Units>(0, std::llround(v));
        }
    }
    int train = std::min(spec.train_steps, spec.length);
    return DemandTrace(std::move(series), train);
}

DemandTrace load_demand_csv(const std::string& path, int horizon, int train_steps) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open demand csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("demand csv is empty: " + path);
    int columns = 1;
    for (char c : line)
        if (c == ',') ++columns;

    std::vector<std::vector<Units>> series(columns);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        int col = 0;
        while (std::getline(row, cell, ',')) {
            if (col >= columns)
                throw std::invalid_argument("demand csv row wider than header: " + path);
            series[col].push_back(std::stoll(cell));
            ++col;
        }
        if (col != columns) throw std::invalid_argument("demand csv row narrower than header: " + path);
    }
    const int len = series.empty() ? 0 : static_cast<int>(series[0].size());
    if (len < horizon)
        throw std::invalid_argument("demand csv shorter than horizon: " + path);
    if (train_steps < 0) train_steps = std::max(0, len - horizon);
    return DemandTrace(std::move(series), std::min(train_steps, len));
}

DemandTrace resolve_demand(const ScenarioConfig& config, const SeededRng& rng) {
    if (const auto* synth = std::get_if<SyntheticDemandSpec>(&config.demand_source)) {
        SyntheticDemandSpec spec = *synth;
        if (spec.length < config.horizon)
            throw std::invalid_argument("synthetic demand length must cover the horizon");
        DemandTrace trace = synth_demand(spec, config.skus, rng);
        return trace;
    }
    const auto& csv = std::get<CsvDemandSpec>(config.demand_source);
    DemandTrace trace = load_demand_csv(csv.path, config.horizon, csv.train_steps);
    if (trace.skus() != config.skus)
        throw std::invalid_argument("demand csv SKU count does not match scenario");
    return trace;
}

}  // namespace espark
