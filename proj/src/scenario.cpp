#include "espark/scenario.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace espark {

namespace {

using nlohmann::json;

Money money_field(const json& j, const char* key, Money fallback) {
    if (!j.contains(key)) return fallback;
    return Money::from_f64(j.at(key).get<double>());
}

std::vector<std::vector<int>> lead_time_field(const json& j, int echelons, int skus) {
    std::vector<std::vector<int>> lead(echelons, std::vector<int>(skus, 2));
    if (!j.contains("lead_time")) return lead;
    const json& lt = j.at("lead_time");
    if (lt.is_number_integer()) {
        int v = lt.get<int>();
        for (auto& row : lead) row.assign(skus, v);
    } else if (lt.is_array() && !lt.empty() && lt[0].is_number_integer()) {
        if (static_cast<int>(lt.size()) != echelons)
            throw std::invalid_argument("lead_time array must have one entry per echelon");
        for (int e = 0; e < echelons; ++e) lead[e].assign(skus, lt[e].get<int>());
    } else if (lt.is_array()) {
        if (static_cast<int>(lt.size()) != echelons)
            throw std::invalid_argument("lead_time matrix must have one row per echelon");
        for (int e = 0; e < echelons; ++e) {
            const json& row = lt[e];
            if (static_cast<int>(row.size()) != skus)
                throw std::invalid_argument("lead_time matrix rows must have one entry per sku");
            for (int k = 0; k < skus; ++k) lead[e][k] = row[k].get<int>();
        }
    } else {
        throw std::invalid_argument("lead_time must be an integer, array, or matrix");
    }
    return lead;
}

DemandSource demand_source_field(const json& j) {
    if (!j.contains("demand_source")) return SyntheticDemandSpec{};
    const json& d = j.at("demand_source");
    const std::string type = d.at("type").get<std::string>();
    if (type == "synthetic") {
        SyntheticDemandSpec spec;
        spec.base = d.value("base", spec.base);
        spec.amplitude = d.value("amplitude", spec.amplitude);
        spec.period = d.value("period", spec.period);
        spec.noise = d.value("noise", spec.noise);
        spec.length = d.value("length", spec.length);
        spec.train_steps = d.value("train_steps", spec.train_steps);
        return spec;
    }
    if (type == "csv") {
        CsvDemandSpec spec;
        spec.path = d.at("path").get<std::string>();
        spec.train_steps = d.value("train_steps", spec.train_steps);
        return spec;
    }
    throw std::invalid_argument("demand_source.type must be 'synthetic' or 'csv'");
}

}  // namespace

ScenarioConfig parse_scenario_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("scenario parse error in " + origin + ": " + e.what());
    }
    ScenarioConfig c;
    c.name = j.value("name", c.name);
    c.echelons = j.value("echelons", c.echelons);
    c.skus = j.value("skus", c.skus);
    c.capacity_per_echelon = j.value("capacity_per_echelon", c.capacity_per_echelon);
    c.horizon = j.value("horizon", c.horizon);
    c.lead_time = lead_time_field(j, c.echelons, c.skus);
    c.unit_price = money_field(j, "unit_price", c.unit_price);
    c.unit_cost = money_field(j, "unit_cost", c.unit_cost);
    c.holding_cost = money_field(j, "holding_cost", c.holding_cost);
    c.backlog_cost = money_field(j, "backlog_cost", c.backlog_cost);
    c.overflow_cost = money_field(j, "overflow_cost", c.overflow_cost);
    c.order_fixed_cost = money_field(j, "order_fixed_cost", c.order_fixed_cost);
    c.demand_source = demand_source_field(j);
    if (j.contains("action_multipliers"))
        c.action_multipliers = j.at("action_multipliers").get<std::vector<double>>();
    c.demand_window = j.value("demand_window", c.demand_window);
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_json(buf.str(), path);
}

std::string scenario_to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["echelons"] = c.echelons;
    j["skus"] = c.skus;
    j["capacity_per_echelon"] = c.capacity_per_echelon;
    j["horizon"] = c.horizon;
    j["lead_time"] = c.lead_time;
    j["unit_price"] = c.unit_price.to_f64();
    j["unit_cost"] = c.unit_cost.to_f64();
    j["holding_cost"] = c.holding_cost.to_f64();
    j["backlog_cost"] = c.backlog_cost.to_f64();
    j["overflow_cost"] = c.overflow_cost.to_f64();
    j["order_fixed_cost"] = c.order_fixed_cost.to_f64();
    if (const auto* synth = std::get_if<SyntheticDemandSpec>(&c.demand_source)) {
        j["demand_source"] = {{"type", "synthetic"},       {"base", synth->base},
                              {"amplitude", synth->amplitude}, {"period", synth->period},
                              {"noise", synth->noise},     {"length", synth->length},
                              {"train_steps", synth->train_steps}};
    } else {
        const auto& csv = std::get<CsvDemandSpec>(c.demand_source);
        j["demand_source"] = {{"type", "csv"}, {"path", csv.path}, {"train_steps", csv.train_steps}};
    }
    j["action_multipliers"] = c.action_multipliers;
    j["demand_window"] = c.demand_window;
    return j.dump(2) + "\n";
}

std::uint64_t hash_bytes(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t hash_file_contents(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file for hashing: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return hash_bytes(buf.str());
}

}  // namespace espark
