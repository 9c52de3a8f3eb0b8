#include "espark/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "espark/demand.hpp"

namespace espark {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

FeedbackReport build_feedback(const EvalAggregates& agg) {
    FeedbackReport r;
    const double steps = std::max<long long>(1, agg.steps);
    r.sales_profit_per_step = agg.component_totals.sales_profit.to_f64() / steps;
    r.order_cost_per_step = agg.component_totals.order_cost.to_f64() / steps;
    r.holding_cost_per_step = agg.component_totals.holding_cost.to_f64() / steps;
    r.backlog_cost_per_step = agg.component_totals.backlog_cost.to_f64() / steps;
    r.excess_cost_per_step = agg.component_totals.excess_cost.to_f64() / steps;
    r.total_per_step = agg.component_totals.total.to_f64() / steps;
    r.fulfillment_ratio =
        agg.demand_echelon0 == 0
            ? 1.0
            : static_cast<double>(agg.sold_echelon0) / static_cast<double>(agg.demand_echelon0);
    r.overflow_ratio = agg.arrived_total == 0
                           ? 0.0
                           : static_cast<double>(agg.arrived_total - agg.received_total) /
                                 static_cast<double>(agg.arrived_total);
    r.action_histogram = agg.action_counts;
    r.total_profit = agg.mean_total_profit;
    return r;
}

std::string render_feedback_text(const FeedbackReport& r) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "Reward feedback (mean per step, summed over agents):\n"
        << "  sales profit: " << r.sales_profit_per_step << "\n"
        << "  order cost:   " << r.order_cost_per_step << "\n"
        << "  holding cost: " << r.holding_cost_per_step << "\n"
        << "  backlog cost: " << r.backlog_cost_per_step << "\n"
        << "  excess cost:  " << r.excess_cost_per_step << "\n"
        << "  total:        " << r.total_per_step << "\n"
        << "Fulfillment ratio: " << r.fulfillment_ratio
        << "  Overflow ratio: " << r.overflow_ratio << "\n"
        << "Mean episode profit: " << r.total_profit << "\n"
        << "Action feedback (selection counts per action index):\n";
    for (std::size_t e = 0; e < r.action_histogram.size(); ++e) {
        out << "  echelon " << e << ": [";
        for (std::size_t a = 0; a < r.action_histogram[e].size(); ++a) {
            if (a) out << ", ";
            out << r.action_histogram[e][a];
        }
        out << "]\n";
    }
    return out.str();
}

double score(const std::vector<double>& checkpoints, int m) {
    if (checkpoints.empty()) throw std::invalid_argument("cannot score an empty checkpoint series");
    if (m < 1) throw std::invalid_argument("score window must be >= 1");
    const int take = std::min<int>(m, static_cast<int>(checkpoints.size()));
    double sum = 0.0;
    for (int i = static_cast<int>(checkpoints.size()) - take;
         i < static_cast<int>(checkpoints.size()); ++i)
        sum += checkpoints[static_cast<std::size_t>(i)];
    return sum / take;
}

namespace {

constexpr std::string_view kImprovementTips =
    "Improvement tips: compare the reward components above. High backlog "
    "cost with low fulfillment means the pruning is too aggressive on "
    "large orders; high holding or excess cost with a heavy tail in the "
    "action histogram means over-ordering actions should be pruned. "
    "Adjust the thresholds rather than rewriting the whole expression, "
    "and keep at least one sensible action available per observation.";

}  // namespace

void reflect(PromptBundle& bundle, const std::string& best_program_text, double best_score,
             const FeedbackReport& report) {
    std::ostringstream block;
    block.setf(std::ios::fixed);
    block.precision(4);
    block << "Reflection on the best exploration function of the last iteration "
          << "(checkpoint score " << best_score << "):\n```\n"
          << best_program_text << "\n```\n"
          << render_feedback_text(report) << kImprovementTips << "\n";
    bundle.reflections.push_back(block.str());
}

std::uint64_t candidate_stream(int iteration, int candidate) {
    return (static_cast<std::uint64_t>(iteration) * 64 + static_cast<std::uint64_t>(candidate)) *
           1'000'000ULL;
}

int select_best(const std::vector<CandidateOutcome>& candidates) {
    int best = -1;
    double best_score = kNegInf;
    for (const auto& c : candidates) {
        if (std::isfinite(c.final_score) && c.final_score > best_score) {
            best_score = c.final_score;
            best = c.index;
        }
    }
    return best;
}

namespace {

json feedback_to_json(const FeedbackReport& r) {
    return json{{"sales_profit_per_step", r.sales_profit_per_step},
                {"order_cost_per_step", r.order_cost_per_step},
                {"holding_cost_per_step", r.holding_cost_per_step},
                {"backlog_cost_per_step", r.backlog_cost_per_step},
                {"excess_cost_per_step", r.excess_cost_per_step},
                {"total_per_step", r.total_per_step},
                {"fulfillment_ratio", r.fulfillment_ratio},
                {"overflow_ratio", r.overflow_ratio},
                {"action_histogram", r.action_histogram},
                {"total_profit", r.total_profit}};
}

FeedbackReport feedback_from_json(const json& j) {
    FeedbackReport r;
    r.sales_profit_per_step = j.value("sales_profit_per_step", 0.0);
    r.order_cost_per_step = j.value("order_cost_per_step", 0.0);
    r.holding_cost_per_step = j.value("holding_cost_per_step", 0.0);
    r.backlog_cost_per_step = j.value("backlog_cost_per_step", 0.0);
    r.excess_cost_per_step = j.value("excess_cost_per_step", 0.0);
    r.total_per_step = j.value("total_per_step", 0.0);
    r.fulfillment_ratio = j.value("fulfillment_ratio", 1.0);
    r.overflow_ratio = j.value("overflow_ratio", 0.0);
    if (j.contains("action_histogram"))
        r.action_histogram = j.at("action_histogram").get<std::vector<std::vector<long long>>>();
    r.total_profit = j.value("total_profit", 0.0);
    return r;
}

json iteration_to_json(const IterationResult& it) {
    json candidates = json::array();
    for (const auto& c : it.candidates) {
        json jc = {{"index", c.index},
                   {"program_text", c.program_text},
                   {"accepted", c.accepted},
                   {"diagnostics", c.diagnostics},
                   {"trained", c.trained},
                   {"failure", c.failure},
                   {"checkpoint_scores", c.checkpoint_scores},
                   {"mask_fallbacks", c.mask_fallbacks},
                   {"feedback", feedback_to_json(c.feedback)}};
        if (std::isfinite(c.final_score)) jc["final_score"] = c.final_score;
        else jc["final_score"] = nullptr;
        candidates.push_back(std::move(jc));
    }
    json j = {{"iteration", it.iteration},
              {"candidates", std::move(candidates)},
              {"best_index", it.best_index},
              {"champion_iteration", it.champion_iteration},
              {"reflection_block", it.reflection_block},
              {"backend_calls_cumulative", it.backend_calls_cumulative}};
    j["best_score"] = std::isfinite(it.best_score) ? json(it.best_score) : json(nullptr);
    j["champion_score"] = std::isfinite(it.champion_score) ? json(it.champion_score) : json(nullptr);
    return j;
}

IterationResult iteration_from_json(const json& j) {
    IterationResult it;
    it.iteration = j.at("iteration").get<int>();
    for (const auto& jc : j.at("candidates")) {
        CandidateOutcome c;
        c.index = jc.at("index").get<int>();
        c.program_text = jc.at("program_text").get<std::string>();
        c.accepted = jc.at("accepted").get<bool>();
        c.diagnostics = jc.at("diagnostics").get<std::vector<std::string>>();
        c.trained = jc.at("trained").get<bool>();
        c.failure = jc.at("failure").get<std::string>();
        c.checkpoint_scores = jc.at("checkpoint_scores").get<std::vector<double>>();
        c.mask_fallbacks = jc.value("mask_fallbacks", 0LL);
        c.final_score = jc.at("final_score").is_null() ? kNegInf : jc.at("final_score").get<double>();
        c.feedback = feedback_from_json(jc.at("feedback"));
        it.candidates.push_back(std::move(c));
    }
    it.best_index = j.at("best_index").get<int>();
    it.best_score = j.at("best_score").is_null() ? kNegInf : j.at("best_score").get<double>();
    it.champion_score =
        j.at("champion_score").is_null() ? kNegInf : j.at("champion_score").get<double>();
    it.champion_iteration = j.at("champion_iteration").get<int>();
    it.reflection_block = j.at("reflection_block").get<std::string>();
    it.backend_calls_cumulative = j.at("backend_calls_cumulative").get<long long>();
    return it;
}

std::string iteration_file(const std::string& run_dir, int iteration) {
    char name[32];
    std::snprintf(name, sizeof(name), "iter_%03d.json", iteration);
    return (fs::path(run_dir) / "iterations" / name).string();
}

std::string best_params_file(const std::string& run_dir, int iteration) {
    char name[40];
    std::snprintf(name, sizeof(name), "iter_%03d_best.bin", iteration);
    return (fs::path(run_dir) / "checkpoints" / name).string();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

/// Generates K candidates from the fixed ablation pool (no backend).
std::vector<GenerationRecord> pool_candidates(const std::vector<std::string>& pool, int k,
                                              int iteration) {
    if (pool.empty()) throw std::invalid_argument("ablation pool must not be empty");
    std::vector<GenerationRecord> records;
    for (int c = 0; c < k; ++c) {
        GenerationRecord rec;
        rec.iteration = iteration;
        rec.candidate_index = c;
        rec.program_text =
            pool[static_cast<std::size_t>((iteration * k + c) % static_cast<int>(pool.size()))];
        try {
            dsl::MaskProgram prog = dsl::parse(rec.program_text);
            auto diags = dsl::check(prog);
            for (const auto& d : diags) rec.diagnostics.push_back(d.message);
            if (diags.empty()) rec.program = std::move(prog);
        } catch (const std::exception& e) {
            rec.diagnostics.push_back(e.what());
        }
        rec.accepted = rec.program.has_value();
        records.push_back(std::move(rec));
    }
    return records;
}

struct TrainedCandidate {
    bool trained = false;
    std::string failure;
    std::optional<TrainResult> result;
};

}  // namespace

EvolutionOutcome run_evolution(const EvolutionConfig& config, const ScenarioConfig& scenario,
                               ChatBackend& generator, ChatBackend* checker, SeededRng rng,
                               const std::string& run_dir) {
    if (config.iterations < 1 || config.batch < 1)
        throw std::invalid_argument("evolution needs iterations >= 1 and batch >= 1");
    scenario.validate();

    const bool persist = !run_dir.empty();
    if (persist) {
        fs::create_directories(fs::path(run_dir) / "iterations");
        fs::create_directories(fs::path(run_dir) / "checkpoints");
        fs::create_directories(fs::path(run_dir) / "feedback");
    }

    // Demand is resolved once; every candidate trains on the same trace.
    const DemandTrace trace = resolve_demand(scenario, rng.fork(rng.stream_id() + 1));

    TrainConfig train_config = config.train;
    train_config.total_steps =
        config.retention ? config.steps_per_iteration : 3 * config.steps_per_iteration;

    PromptBundle bundle = default_prompt_bundle(scenario);

    EvolutionOutcome outcome(PolicyParams(12, scenario.action_count(), train_config.hidden));
    long long backend_calls = 0;

    std::optional<PolicyParams> previous_best;  // retention source
    int start_iteration = 1;

    if (config.resume) {
        if (!persist) throw std::invalid_argument("resume requires a run directory");
        for (int i = 1; i <= config.iterations; ++i) {
            const std::string file = iteration_file(run_dir, i);
            if (!fs::exists(file)) break;
            std::ifstream in(file);
            json j;
            in >> j;
            IterationResult it = iteration_from_json(j);
            if (!it.reflection_block.empty()) bundle.reflections.push_back(it.reflection_block);
            backend_calls = it.backend_calls_cumulative;
            if (it.best_index >= 0)
                previous_best = load_params(best_params_file(run_dir, i), config.config_hash);
            outcome.champion_score = it.champion_score;
            outcome.champion_iteration = it.champion_iteration;
            outcome.iterations.push_back(std::move(it));
            start_iteration = i + 1;
        }
        if (outcome.champion_iteration > 0) {
            outcome.champion_params = load_params(
                (fs::path(run_dir) / "checkpoints" / "champion.bin").string(), config.config_hash);
            const IterationResult& champ_it =
                outcome.iterations[static_cast<std::size_t>(outcome.champion_iteration - 1)];
            outcome.champion_program =
                champ_it.candidates[static_cast<std::size_t>(champ_it.best_index)].program_text;
        }
        generator.fast_forward(backend_calls);
    }

    const int jobs = config.jobs > 0
                         ? config.jobs
                         : std::max(1u, std::thread::hardware_concurrency());

    for (int iteration = start_iteration; iteration <= config.iterations; ++iteration) {
        // --- generation (with one retry on a fully rejected batch) ---
        std::vector<GenerationRecord> records;
        for (int attempt = 0; attempt < 2; ++attempt) {
            records = config.llm_ablation
                          ? pool_candidates(config.ablation_pool, config.batch, iteration - 1)
                          : generate_candidates(bundle, config.batch, generator, checker,
                                                config.generation, iteration);
            for (const auto& rec : records) backend_calls += rec.backend_calls;
            if (std::any_of(records.begin(), records.end(),
                            [](const GenerationRecord& r) { return r.accepted; }))
                break;
            if (attempt == 1) {
                std::vector<std::string> diags;
                for (const auto& rec : records)
                    for (const auto& d : rec.diagnostics)
                        diags.push_back("candidate " + std::to_string(rec.candidate_index) + ": " + d);
                throw EvolutionAbort("no executable exploration function after retry", diags);
            }
        }

        // --- K parallel trainings ---
        std::vector<TrainedCandidate> trained(static_cast<std::size_t>(config.batch));
        auto run_candidate = [&](int k) {
            TrainedCandidate out;
            const GenerationRecord& rec = records[static_cast<std::size_t>(k)];
            if (!rec.accepted) return out;
            try {
                auto program = std::make_shared<dsl::MaskProgram>(*rec.program);
                const std::vector<double> multipliers = scenario.action_multipliers;
                MaskSource mask = [program, multipliers](const Observation& obs, SeededRng&) {
                    return dsl::evaluate(*program, obs, multipliers);
                };
                SeededRng candidate_rng = rng.fork(candidate_stream(iteration - 1, k));
                std::optional<PolicyParams> init;
                if (config.retention && previous_best) init = *previous_best;
                EnvFactory factory = [&scenario, &trace]() {
                    return std::make_unique<InventoryRolloutEnv>(scenario, trace);
                };
                out.result = train(factory, mask, train_config, candidate_rng, nullptr, init);
                out.trained = true;
            } catch (const std::exception& e) {
                out.failure = std::string("candidate ") + std::to_string(k) + ": " + e.what();
            }
            return out;
        };
        for (int base = 0; base < config.batch; base += jobs) {
            std::vector<std::future<TrainedCandidate>> wave;
            const int hi = std::min(config.batch, base + jobs);
            for (int k = base; k < hi; ++k)
                wave.push_back(std::async(std::launch::async, run_candidate, k));
            for (int k = base; k < hi; ++k)
                trained[static_cast<std::size_t>(k)] = wave[static_cast<std::size_t>(k - base)].get();
        }

        // --- selection ---
        IterationResult iter;
        iter.iteration = iteration;
        iter.backend_calls_cumulative = backend_calls;
        for (int k = 0; k < config.batch; ++k) {
            const GenerationRecord& rec = records[static_cast<std::size_t>(k)];
            TrainedCandidate& tc = trained[static_cast<std::size_t>(k)];
            CandidateOutcome c;
            c.index = k;
            c.accepted = rec.accepted;
            c.diagnostics = rec.diagnostics;
            c.program_text = rec.program ? dsl::format(*rec.program) : rec.program_text;
            c.trained = tc.trained;
            c.failure = tc.failure;
            if (tc.trained) {
                c.checkpoint_scores = tc.result->checkpoint_scores;
                c.mask_fallbacks = tc.result->mask_fallbacks;
                try {
                    c.final_score = score(c.checkpoint_scores, config.score_checkpoints);
                    if (!std::isfinite(c.final_score)) c.final_score = kNegInf;
                } catch (const std::exception& e) {
                    c.failure = e.what();
                    c.final_score = kNegInf;
                }
                c.feedback = build_feedback(tc.result->last_eval);
            }
            iter.candidates.push_back(std::move(c));
        }
        iter.best_index = select_best(iter.candidates);
        if (iter.best_index >= 0)
            iter.best_score = iter.candidates[static_cast<std::size_t>(iter.best_index)].final_score;
        if (iter.best_index < 0) {
            std::vector<std::string> diags;
            for (const auto& c : iter.candidates)
                if (!c.failure.empty()) diags.push_back(c.failure);
            throw EvolutionAbort("every trained candidate failed in iteration " +
                                     std::to_string(iteration),
                                 diags);
        }

        TrainResult& best_result = *trained[static_cast<std::size_t>(iter.best_index)].result;
        previous_best = best_result.params;

        if (iter.best_score > outcome.champion_score) {
            outcome.champion_score = iter.best_score;
            outcome.champion_iteration = iteration;
            outcome.champion_params = best_result.params;
            outcome.champion_program =
                iter.candidates[static_cast<std::size_t>(iter.best_index)].program_text;
            if (persist)
                save_params((fs::path(run_dir) / "checkpoints" / "champion.bin").string(),
                            outcome.champion_params, config.config_hash);
        }
        iter.champion_score = outcome.champion_score;
        iter.champion_iteration = outcome.champion_iteration;

        // --- reflection ---
        if (!config.llm_ablation && iteration < config.iterations) {
            const CandidateOutcome& best = iter.candidates[static_cast<std::size_t>(iter.best_index)];
            reflect(bundle, best.program_text, best.final_score, best.feedback);
            iter.reflection_block = bundle.reflections.back();
        }

        if (persist) {
            save_params(best_params_file(run_dir, iteration), best_result.params,
                        config.config_hash);
            const CandidateOutcome& best = iter.candidates[static_cast<std::size_t>(iter.best_index)];
            char fb_name[32];
            std::snprintf(fb_name, sizeof(fb_name), "iter_%03d.txt", iteration);
            write_text_file(fs::path(run_dir) / "feedback" / fb_name,
                            render_feedback_text(best.feedback));
            write_text_file(iteration_file(run_dir, iteration), iteration_to_json(iter).dump(2) + "\n");
        }
        outcome.iterations.push_back(std::move(iter));

        if (config.stop_after_iteration && iteration >= *config.stop_after_iteration &&
            iteration < config.iterations) {
            outcome.backend_calls = backend_calls;
            return outcome;  // simulated kill between iterations
        }
    }

    // Fresh held-out evaluation of the champion, deterministic per seed.
    {
        InventoryRolloutEnv eval_env(scenario, trace);
        SeededRng eval_rng = rng.fork(rng.stream_id() + 999'999);
        EvalAggregates agg = evaluate_policy(eval_env, outcome.champion_params,
                                             train_config.eval_episodes, eval_rng);
        outcome.final_test_profit = agg.mean_total_profit;
    }
    outcome.backend_calls = backend_calls;
    outcome.completed = true;
    return outcome;
}

}  // namespace espark
