#include "espark/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "espark/baselines.hpp"
#include "espark/demand.hpp"
#include "espark/evolution.hpp"
#include "espark/scenario.hpp"
#include "espark/toy_games.hpp"
#include "espark/trainer.hpp"

namespace espark {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

/// Every command records what it ran and what it produced.
struct ManifestWriter {
    json manifest;
    fs::path path;

    ManifestWriter(const std::string& command, const fs::path& out_dir) {
        manifest["command"] = command;
        manifest["started_at"] = timestamp_now();
        manifest["artifacts"] = json::array();
        path = out_dir / "manifest.json";
    }
    void add_artifact(const fs::path& p) { manifest["artifacts"].push_back(p.string()); }
    void finish() {
        manifest["finished_at"] = timestamp_now();
        write_file(path, manifest.dump(2) + "\n");
    }
};

std::uint64_t config_hash_of(const json& config) { return hash_bytes(config.dump()); }

/// CLI11's vector overload consumes arguments from the back.
void parse_args(CLI::App& app, const std::vector<std::string>& args) {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
}

ScenarioConfig load_scenario_or_exit(const std::string& path, int& exit_code) {
    if (!fs::exists(path)) {
        std::cerr << "error: scenario file not found: " << path << "\n";
        exit_code = kExitConfigError;
        return {};
    }
    exit_code = kExitOk;
    return load_scenario(path);
}

TrainConfig desk_train_config(long long steps) {
    TrainConfig config;
    config.total_steps = steps;
    return config;
}

std::string scores_csv(const std::vector<double>& scores) {
    std::ostringstream out;
    out << "checkpoint,score\n";
    out.setf(std::ios::fixed);
    out.precision(4);
    for (std::size_t i = 0; i < scores.size(); ++i) out << (i + 1) << ',' << scores[i] << '\n';
    return out.str();
}

}  // namespace

int cmd_train(const std::vector<std::string>& args) {
    CLI::App app{"plain shared-parameter PPO training"};
    std::string scenario_path, out_dir = "runs/train";
    std::uint64_t seed = 1;
    long long steps = 200'000;
    app.add_option("--scenario", scenario_path, "scenario file")->required();
    app.add_option("--seed", seed, "run seed");
    app.add_option("--steps", steps, "total environment steps");
    app.add_option("--out", out_dir, "output directory");
    try {
        parse_args(app, args);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }

    int exit_code;
    ScenarioConfig scenario = load_scenario_or_exit(scenario_path, exit_code);
    if (exit_code != kExitOk) return exit_code;

    try {
        fs::create_directories(out_dir);
        ManifestWriter manifest("train", out_dir);
        json config = {{"scenario", scenario_to_json(scenario)},
                       {"seed", seed},
                       {"steps", steps}};
        const std::uint64_t config_hash = config_hash_of(config);
        manifest.manifest["config_hash"] = hex64(config_hash);
        manifest.manifest["seed"] = seed;
        manifest.manifest["scenario_hash"] = hex64(hash_file_contents(scenario_path));

        SeededRng rng(seed, 0);
        const DemandTrace trace = resolve_demand(scenario, rng.fork(1));
        EnvFactory factory = [&scenario, &trace]() {
            return std::make_unique<InventoryRolloutEnv>(scenario, trace);
        };
        TrainResult result =
            train(factory, nullptr, desk_train_config(steps), rng.fork(0));

        write_file(fs::path(out_dir) / "scores.csv", scores_csv(result.checkpoint_scores));
        manifest.add_artifact(fs::path(out_dir) / "scores.csv");
        save_params((fs::path(out_dir) / "policy.bin").string(), result.params, config_hash);
        manifest.add_artifact(fs::path(out_dir) / "policy.bin");

        const double final_profit =
            result.checkpoint_scores.empty() ? 0.0 : result.checkpoint_scores.back();
        json report = {{"schema", "espark.train_report.v1"},
                       {"scenario", scenario.name},
                       {"seed", seed},
                       {"steps", result.env_steps},
                       {"updates", result.updates},
                       {"checkpoints", result.checkpoint_scores},
                       {"final_profit", final_profit},
                       {"config_hash", hex64(config_hash)}};
        write_file(fs::path(out_dir) / "train_report.json", report.dump(2) + "\n");
        manifest.add_artifact(fs::path(out_dir) / "train_report.json");
        manifest.finish();

        std::cout << "final profit (last checkpoint): " << final_profit << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

namespace {

struct EsparkCliConfig {
    std::string scenario_path;
    std::uint64_t seed = 1;
    int iterations = 10;
    int batch = 4;
    long long steps = 40'000;
    bool retention = true;
    bool no_llm = false;
    std::string mock_script;
    std::string backend_url;
    std::string model = "gpt-4";
    std::string baseline = "auto";  // auto | off
    int jobs = 0;

    json to_json() const {
        return json{{"scenario_path", scenario_path},
                    {"seed", seed},
                    {"iterations", iterations},
                    {"batch", batch},
                    {"steps", steps},
                    {"retention", retention},
                    {"no_llm", no_llm},
                    {"mock_script", mock_script},
                    {"backend_url", backend_url},
                    {"model", model},
                    {"baseline", baseline}};
    }
    static EsparkCliConfig from_json(const json& j) {
        EsparkCliConfig c;
        c.scenario_path = j.at("scenario_path").get<std::string>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.iterations = j.at("iterations").get<int>();
        c.batch = j.at("batch").get<int>();
        c.steps = j.at("steps").get<long long>();
        c.retention = j.at("retention").get<bool>();
        c.no_llm = j.at("no_llm").get<bool>();
        c.mock_script = j.at("mock_script").get<std::string>();
        c.backend_url = j.at("backend_url").get<std::string>();
        c.model = j.at("model").get<std::string>();
        c.baseline = j.at("baseline").get<std::string>();
        return c;
    }
};

json report_json(const EvolutionOutcome& outcome, const ScenarioConfig& scenario,
                 std::uint64_t seed, std::uint64_t config_hash) {
    json iterations = json::array();
    json recorded_best = json::array();
    for (const auto& it : outcome.iterations) {
        iterations.push_back({{"iteration", it.iteration},
                              {"best_index", it.best_index},
                              {"best_score", it.best_score},
                              {"champion_score", it.champion_score}});
        recorded_best.push_back(it.champion_score);
    }
    return json{{"schema", "espark.report.v1"},
                {"scenario", scenario.name},
                {"seed", seed},
                {"config_hash", hex64(config_hash)},
                {"iterations", iterations},
                {"recorded_best_series", recorded_best},
                {"champion",
                 {{"iteration", outcome.champion_iteration},
                  {"score", outcome.champion_score},
                  {"program", outcome.champion_program}}},
                {"final_test_profit", outcome.final_test_profit},
                {"backend_calls", outcome.backend_calls},
                {"baseline", nullptr}};
}

}  // namespace

int cmd_espark(const std::vector<std::string>& args) {
    CLI::App app{"evolutionary exploration-function search"};
    EsparkCliConfig cli;
    std::string out_dir = "runs/espark";
    std::string resume_dir;
    std::optional<int> stop_after;
    app.add_option("--scenario", cli.scenario_path, "scenario file");
    app.add_option("--seed", cli.seed, "run seed");
    app.add_option("--iterations", cli.iterations, "evolution iterations (N)");
    app.add_option("--batch", cli.batch, "candidates per iteration (K)");
    app.add_option("--steps", cli.steps, "training steps per iteration per candidate");
    bool no_retention = false;
    app.add_flag("--no-retention", no_retention, "disable retention training");
    app.add_flag("--no-llm", cli.no_llm, "replace the backend by a fixed program pool");
    app.add_option("--mock-script", cli.mock_script, "scripted backend responses (JSON)");
    app.add_option("--backend-url", cli.backend_url, "chat-completions endpoint");
    app.add_option("--model", cli.model, "backend model id");
    app.add_option("--baseline", cli.baseline, "plain-IPPO comparison: auto|off");
    app.add_option("--jobs", cli.jobs, "parallel candidate trainings");
    app.add_option("--out", out_dir, "run directory");
    app.add_option("--resume", resume_dir, "resume a run directory");
    app.add_option("--stop-after-iteration", stop_after,
                   "stop after persisting this iteration (testing aid)");
    try {
        parse_args(app, args);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }
    if (no_retention) cli.retention = false;

    const bool resuming = !resume_dir.empty();
    if (resuming) {
        out_dir = resume_dir;
        const fs::path cfg_path = fs::path(out_dir) / "cli_config.json";
        if (!fs::exists(cfg_path)) {
            std::cerr << "error: no cli_config.json under " << out_dir << "\n";
            return kExitConfigError;
        }
        std::ifstream in(cfg_path);
        json j;
        in >> j;
        cli = EsparkCliConfig::from_json(j);
    }
    if (cli.scenario_path.empty()) {
        std::cerr << "error: --scenario is required\n";
        return kExitConfigError;
    }
    if (!cli.no_llm && cli.mock_script.empty() && cli.backend_url.empty()) {
        std::cerr << "error: provide --mock-script, --backend-url, or --no-llm\n";
        return kExitConfigError;
    }

    int exit_code;
    ScenarioConfig scenario = load_scenario_or_exit(cli.scenario_path, exit_code);
    if (exit_code != kExitOk) return exit_code;

    try {
        fs::create_directories(out_dir);
        ManifestWriter manifest("espark", out_dir);
        const std::uint64_t config_hash = config_hash_of(cli.to_json());
        manifest.manifest["config_hash"] = hex64(config_hash);
        manifest.manifest["seed"] = cli.seed;
        manifest.manifest["scenario_hash"] = hex64(hash_file_contents(cli.scenario_path));
        write_file(fs::path(out_dir) / "cli_config.json", cli.to_json().dump(2) + "\n");
        write_file(fs::path(out_dir) / "scenario.snapshot.json", scenario_to_json(scenario));

        std::unique_ptr<ChatBackend> backend;
        if (cli.no_llm) {
            backend = std::make_unique<MockBackend>(std::vector<std::string>{"unused"});
        } else if (!cli.mock_script.empty()) {
            backend = std::make_unique<MockBackend>(load_mock_script(cli.mock_script));
        } else {
            backend = std::make_unique<HttpBackend>(cli.backend_url, cli.model);
        }
        std::ofstream traffic(fs::path(out_dir) / "traffic.jsonl", std::ios::app);
        backend->set_traffic_logger([&traffic](const std::string& line) {
            traffic << line << "\n";
            traffic.flush();
        });

        EvolutionConfig config;
        config.iterations = cli.iterations;
        config.batch = cli.batch;
        config.retention = cli.retention;
        config.steps_per_iteration = cli.steps;
        config.jobs = cli.jobs;
        config.config_hash = config_hash;
        config.resume = resuming;
        config.stop_after_iteration = stop_after;
        config.llm_ablation = cli.no_llm;
        if (cli.no_llm) {
            config.ablation_pool = {
                "1",
                "action_quantity <= 2 * mean_demand",
                "action_quantity + in_stock + in_transit <= capacity_remaining + in_stock",
                "action_multiplier <= 3",
            };
        }

        SeededRng rng(cli.seed, 0);
        EvolutionOutcome outcome =
            run_evolution(config, scenario, *backend, nullptr, rng, out_dir);
        if (!outcome.completed) {
            manifest.finish();
            std::cout << "stopped after iteration " << outcome.iterations.back().iteration
                      << " (resume with --resume " << out_dir << ")\n";
            return kExitOk;
        }

        json report = report_json(outcome, scenario, cli.seed, config_hash);
        if (cli.baseline == "auto") {
            const DemandTrace trace = resolve_demand(scenario, rng.fork(1));
            EnvFactory factory = [&scenario, &trace]() {
                return std::make_unique<InventoryRolloutEnv>(scenario, trace);
            };
            TrainConfig plain = desk_train_config(cli.steps * cli.iterations);
            TrainResult plain_result =
                train(factory, nullptr, plain, rng.fork(candidate_stream(0, 0)));
            const double plain_profit = plain_result.checkpoint_scores.empty()
                                            ? 0.0
                                            : plain_result.checkpoint_scores.back();
            report["baseline"] = {{"plain_ippo_profit", plain_profit},
                                  {"delta", outcome.final_test_profit - plain_profit}};
            std::cout << "final test profit " << outcome.final_test_profit
                      << " vs plain IPPO " << plain_profit << " (delta "
                      << outcome.final_test_profit - plain_profit << ")\n";
        } else {
            std::cout << "final test profit " << outcome.final_test_profit << "\n";
        }
        write_file(fs::path(out_dir) / "report.json", report.dump(2) + "\n");
        manifest.add_artifact(fs::path(out_dir) / "report.json");
        manifest.finish();
        return kExitOk;
    } catch (const EvolutionAbort& e) {
        std::cerr << "backend/evolution failure: " << e.what() << "\n";
        for (const auto& d : e.diagnostics) std::cerr << "  " << d << "\n";
        std::cerr << "traffic log: " << (fs::path(out_dir) / "traffic.jsonl").string() << "\n";
        return kExitBackendError;
    } catch (const BackendError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return kExitBackendError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cmd_baselines(const std::vector<std::string>& args) {
    CLI::App app{"OR baselines and pruning comparisons"};
    std::string scenario_path, out_dir = "runs/baselines";
    std::uint64_t seed = 1;
    long long rl_steps = 20'000;
    int jobs = 0;
    app.add_option("--scenario", scenario_path, "scenario file")->required();
    app.add_option("--seed", seed, "run seed");
    app.add_option("--rl-steps", rl_steps,
                   "training budget for the RL/pruning rows (0 skips them)");
    app.add_option("--jobs", jobs, "parallel workers");
    app.add_option("--out", out_dir, "output directory");
    try {
        parse_args(app, args);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }

    int exit_code;
    ScenarioConfig scenario = load_scenario_or_exit(scenario_path, exit_code);
    if (exit_code != kExitOk) return exit_code;

    try {
        fs::create_directories(out_dir);
        ManifestWriter manifest("baselines", out_dir);
        json config = {{"scenario", scenario_to_json(scenario)},
                       {"seed", seed},
                       {"rl_steps", rl_steps}};
        manifest.manifest["config_hash"] = hex64(config_hash_of(config));
        manifest.manifest["seed"] = seed;
        manifest.manifest["scenario_hash"] = hex64(hash_file_contents(scenario_path));

        SeededRng rng(seed, 0);
        const DemandTrace trace = resolve_demand(scenario, rng.fork(1));

        struct Row {
            std::string method;
            EpisodeMetrics metrics;
        };
        std::vector<Row> rows;
        auto eval_or = [&](const std::string& name, const OrderFn& policy) {
            InventoryEnv env(scenario, trace);
            EpisodeLedger ledger = rollout_policy(env, Segment::Test, 0, policy);
            rows.push_back({name, metrics(ledger)});
            write_file(fs::path(out_dir) / ("ledger_" + name + ".csv"), ledger_to_csv(ledger));
            manifest.add_artifact(fs::path(out_dir) / ("ledger_" + name + ".csv"));
        };

        BaseStockPolicy bs = fit_base_stock(trace, scenario);
        write_file(fs::path(out_dir) / "base_stock.json", base_stock_to_json(bs));
        manifest.add_artifact(fs::path(out_dir) / "base_stock.json");
        eval_or("bs_static", base_stock_order_fn(bs));
        eval_or("bs_dynamic", dynamic_base_stock_fn(trace, scenario));
        SsPolicy ss = fit_ss(trace, scenario);
        write_file(fs::path(out_dir) / "ss_policy.json", ss_to_json(ss));
        manifest.add_artifact(fs::path(out_dir) / "ss_policy.json");
        eval_or("ss", ss_order_fn(ss));
        eval_or("never_order", never_order_fn());
        eval_or("uniform_random", uniform_random_order_fn(rng.fork(7)));

        // RL rows: plain IPPO plus the pruning variants, trained at the
        // requested budget, evaluated on held-out episodes.
        std::ostringstream heatmap;
        heatmap << "method,echelon";
        for (int a = 0; a < scenario.action_count(); ++a) heatmap << ",action_" << a;
        heatmap << "\n";
        if (rl_steps > 0) {
            EnvFactory factory = [&scenario, &trace]() {
                return std::make_unique<InventoryRolloutEnv>(scenario, trace);
            };
            const std::vector<double>& multipliers = scenario.action_multipliers;
            const int action_count = scenario.action_count();
            auto ss_shared = std::make_shared<SsPolicy>(ss);
            const std::vector<std::pair<std::string, MaskSource>> variants = {
                {"ippo", nullptr},
                {"ippo_random_pruning",
                 [action_count](const Observation&, SeededRng& r) {
                     return random_pruning_mask(r, 0.3, action_count);
                 }},
                {"ippo_ss_pruning",
                 [ss_shared, multipliers](const Observation& obs, SeededRng&) {
                     return ss_pruning_mask(obs, *ss_shared, multipliers);
                 }},
                {"ippo_upbound_pruning",
                 [scenario](const Observation& obs, SeededRng&) {
                     return upbound_pruning_mask(obs, scenario);
                 }},
            };
            for (std::size_t v = 0; v < variants.size(); ++v) {
                const MaskSource& mask = variants[v].second;
                TrainConfig tc = desk_train_config(rl_steps);
                TrainResult result =
                    train(factory, mask, tc, rng.fork(candidate_stream(0, static_cast<int>(v))));
                EpisodeMetrics m;
                m.total_profit = Money::from_f64(result.last_eval.mean_total_profit);
                m.fulfillment_ratio =
                    result.last_eval.demand_echelon0 == 0
                        ? 1.0
                        : static_cast<double>(result.last_eval.sold_echelon0) /
                              static_cast<double>(result.last_eval.demand_echelon0);
                m.overflow_ratio =
                    result.last_eval.arrived_total == 0
                        ? 0.0
                        : static_cast<double>(result.last_eval.arrived_total -
                                              result.last_eval.received_total) /
                              static_cast<double>(result.last_eval.arrived_total);
                m.profit_per_step = result.last_eval.steps == 0
                                        ? 0.0
                                        : result.last_eval.mean_total_profit *
                                              result.last_eval.episodes /
                                              static_cast<double>(result.last_eval.steps);
                rows.push_back({variants[v].first, m});
                for (std::size_t e = 0; e < result.last_eval.action_counts.size(); ++e) {
                    heatmap << variants[v].first << ',' << e;
                    for (long long c : result.last_eval.action_counts[e]) heatmap << ',' << c;
                    heatmap << "\n";
                }
            }
        }

        std::ostringstream csv;
        csv << "method,profit,fulfillment_ratio,overflow_ratio,profit_per_step\n";
        csv.setf(std::ios::fixed);
        csv.precision(4);
        std::ostringstream txt;
        txt << std::left << std::setw(24) << "method" << std::right << std::setw(14) << "profit"
            << std::setw(14) << "fulfillment" << std::setw(12) << "overflow" << std::setw(16)
            << "profit/step" << "\n";
        for (const auto& row : rows) {
            csv << row.method << ',' << row.metrics.total_profit.to_string() << ','
                << row.metrics.fulfillment_ratio << ',' << row.metrics.overflow_ratio << ','
                << row.metrics.profit_per_step << "\n";
            txt << std::left << std::setw(24) << row.method << std::right << std::setw(14)
                << row.metrics.total_profit.to_string() << std::setw(14) << std::setprecision(4)
                << std::fixed << row.metrics.fulfillment_ratio << std::setw(12)
                << row.metrics.overflow_ratio << std::setw(16) << row.metrics.profit_per_step
                << "\n";
        }
        write_file(fs::path(out_dir) / "comparison.csv", csv.str());
        write_file(fs::path(out_dir) / "comparison.txt", txt.str());
        write_file(fs::path(out_dir) / "action_heatmap.csv", heatmap.str());
        manifest.add_artifact(fs::path(out_dir) / "comparison.csv");
        manifest.add_artifact(fs::path(out_dir) / "comparison.txt");
        manifest.add_artifact(fs::path(out_dir) / "action_heatmap.csv");
        manifest.finish();
        std::cout << txt.str();
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cmd_verify(const std::vector<std::string>& args) {
    CLI::App app{"numeric verification of the pruning propositions"};
    int n_agents = 0;
    double r1 = 1.0, r2 = 1.0;
    int trials = 10'000;
    std::uint64_t seed = 12345;
    app.add_option("--n-agents", n_agents, "verify a single game with N agents");
    app.add_option("--r1", r1, "cooperative payoff");
    app.add_option("--r2", r2, "miscoordination penalty");
    app.add_option("--trials", trials, "Monte Carlo trials");
    app.add_option("--seed", seed, "rng seed");
    try {
        parse_args(app, args);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }

    bool all_ok = true;
    std::cout.setf(std::ios::fixed);
    std::cout.precision(4);

    std::vector<OneStateGame> games;
    if (n_agents > 0) games.push_back({n_agents, r1, r2});
    else games = {{2, 1.0, 1.0}, {3, 1.0, 1.0}, {5, 2.0, 1.0}};

    if (trials < 1000)
        std::cout << "warning: " << trials
                  << " trials gives a wide confidence interval; tolerance check may be noisy\n";

    for (const auto& game : games) {
        const double closed = prop2_closed_form(game);
        Prop2MonteCarloConfig mc_config;
        mc_config.trials = trials;
        const Prop2MonteCarloResult mc =
            prop2_monte_carlo(game, mc_config, SeededRng(seed, 0));
        const double gap = std::abs(mc.converged_to_best_fraction - closed);
        const bool ok = gap <= 0.03;
        all_ok = all_ok && ok;
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " convergence probability N=" << game.n_agents
                  << " r1=" << game.r1 << " r2=" << game.r2 << ": closed-form " << closed
                  << ", monte-carlo " << mc.converged_to_best_fraction << ", |gap| " << gap
                  << "\n";
    }

    {
        SeededRng rng(seed, 1);
        double worst = 0.0;
        bool monotone = true;
        for (int rep = 0; rep < 20; ++rep) {
            const int arms = 2 + static_cast<int>(rng.uniform_int(5));
            std::vector<double> rewards(static_cast<std::size_t>(arms));
            for (auto& r : rewards) r = rng.uniform(-2.0, 2.0);
            std::vector<double> probs(static_cast<std::size_t>(arms));
            double sum = 0.0;
            for (auto& p : probs) {
                p = rng.uniform(0.05, 1.0);
                sum += p;
            }
            for (auto& p : probs) p /= sum;
            TabularMDP mdp = TabularMDP::bandit(rewards);
            std::vector<std::vector<bool>> mask(1, std::vector<bool>(static_cast<std::size_t>(arms), true));
            mask[0][rng.uniform_int(static_cast<std::uint64_t>(arms))] = false;
            const auto check = prop1_identity_check(mdp, {probs}, mask);
            worst = std::max(worst, check.max_residual);

            // prune exactly the nonpositive-advantage arms
            const double v = exact_value(mdp, {probs})[0];
            std::vector<std::vector<bool>> improve_mask(1, std::vector<bool>(static_cast<std::size_t>(arms)));
            bool kept_any = false;
            for (int a = 0; a < arms; ++a) {
                improve_mask[0][static_cast<std::size_t>(a)] = rewards[static_cast<std::size_t>(a)] - v > 0;
                kept_any = kept_any || improve_mask[0][static_cast<std::size_t>(a)];
            }
            if (kept_any) {
                const double v_masked = exact_value(mdp, masked_policy({probs}, improve_mask))[0];
                monotone = monotone && v_masked >= v - 1e-12;
            }
        }
        const bool ok = worst < 1e-10 && monotone;
        all_ok = all_ok && ok;
        std::cout << (ok ? "[PASS]" : "[FAIL]")
                  << " pruned-policy value identity on 20 random bandits: max residual " << worst
                  << (monotone ? ", value never decreased" : ", VALUE DECREASED") << "\n";
    }

    {
        // analytic vs central-finite-difference gradients on a toy batch
        SeededRng rng(seed, 2);
        PolicyParams params = PolicyParams::xavier_init(4, 3, rng, 8);
        TransitionBatch batch;
        batch.features = Eigen::MatrixXd::Random(4, 3);
        batch.actions = {0, 2, 1};
        batch.allow = Eigen::MatrixXd::Ones(3, 3);
        batch.allow(1, 0) = 0.0;
        batch.old_log_probs = Eigen::VectorXd::Constant(3, -1.0);
        batch.advantages = Eigen::VectorXd::Zero(3);
        batch.advantages << 0.7, -0.4, 0.1;
        batch.returns = Eigen::VectorXd::Zero(3);
        batch.returns << 0.3, -0.2, 0.5;
        TrainConfig config;
        config.entropy_coef = 0.01;

        const Eigen::VectorXd analytic = ppo_gradient(params, batch, config);
        double max_rel = 0.0;
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < params.size(); ++i) {
            PolicyParams shifted = params;
            shifted.flat()(i) += h;
            const double up = ppo_loss(shifted, batch, config);
            shifted.flat()(i) -= 2 * h;
            const double down = ppo_loss(shifted, batch, config);
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(analytic(i) - fd) /
                               std::max({1e-6, std::abs(analytic(i)), std::abs(fd)});
            max_rel = std::max(max_rel, rel);
        }
        const bool ok = max_rel < 1e-4;
        all_ok = all_ok && ok;
        std::cout << (ok ? "[PASS]" : "[FAIL]")
                  << " policy-gradient finite-difference check: max relative error "
                  << std::scientific << max_rel << std::fixed << "\n";
    }

    return all_ok ? kExitOk : kExitCheckFailure;
}

int run_cli(const std::vector<std::string>& args) {
    if (args.empty()) {
        std::cerr << "usage: espark <train|espark|baselines|verify> [options]\n";
        return kExitConfigError;
    }
    const std::string& command = args.front();
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (command == "train") return cmd_train(rest);
    if (command == "espark") return cmd_espark(rest);
    if (command == "baselines") return cmd_baselines(rest);
    if (command == "verify") return cmd_verify(rest);
    std::cerr << "unknown command: " << command << "\n";
    return kExitConfigError;
}

}  // namespace espark
