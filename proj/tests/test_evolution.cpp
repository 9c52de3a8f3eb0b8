#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "espark/demand.hpp"
#include "espark/evolution.hpp"

using namespace espark;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny_scenario() {
    ScenarioConfig c;
    c.name = "evolution-test";
    c.echelons = 1;
    c.skus = 2;
    c.capacity_per_echelon = 400;
    c.horizon = 20;
    c.lead_time.assign(1, std::vector<int>(2, 1));
    SyntheticDemandSpec spec;
    spec.base = 4;
    spec.amplitude = 1;
    spec.noise = 0.5;
    spec.length = 100;
    spec.train_steps = 80;
    c.demand_source = spec;
    return c;
}

EvolutionConfig tiny_config(int iterations, int batch) {
    EvolutionConfig config;
    config.iterations = iterations;
    config.batch = batch;
    config.steps_per_iteration = 240;
    config.train.accumulated_episodes = 2;
    config.train.checkpoint_interval = 2;
    config.train.eval_episodes = 2;
    config.train.minibatch_size = 64;
    config.jobs = 2;
    return config;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("score takes the mean of the last checkpoints") {
    CHECK(score({10.0}, 3) == 10.0);
    CHECK(score({1.0, 2.0, 3.0, 4.0}, 3) == doctest::Approx(3.0));
    CHECK(score({5.0, 7.0}, 3) == doctest::Approx(6.0));
    CHECK_THROWS_AS(score({}, 3), std::invalid_argument);
}

TEST_CASE("feedback aggregates reduce to hand-computed per-step means") {
    EvalAggregates agg;
    agg.steps = 3;
    agg.episodes = 1;
    agg.mean_total_profit = 12.5;
    agg.component_totals = RewardBreakdown::make(
        Money::from_f64(30.0), Money::from_f64(6.0), Money::from_f64(3.0), Money::from_f64(1.5),
        Money::from_f64(0.0));
    agg.demand_echelon0 = 20;
    agg.sold_echelon0 = 16;
    agg.arrived_total = 10;
    agg.received_total = 9;
    agg.action_counts = {{5, 1, 0}};
    FeedbackReport report = build_feedback(agg);
    CHECK(report.sales_profit_per_step == doctest::Approx(10.0));
    CHECK(report.order_cost_per_step == doctest::Approx(2.0));
    CHECK(report.holding_cost_per_step == doctest::Approx(1.0));
    CHECK(report.backlog_cost_per_step == doctest::Approx(0.5));
    CHECK(report.total_per_step == doctest::Approx((30.0 - 6.0 - 3.0 - 1.5) / 3.0));
    CHECK(report.fulfillment_ratio == doctest::Approx(0.8));
    CHECK(report.overflow_ratio == doctest::Approx(0.1));
    CHECK(report.total_profit == doctest::Approx(12.5));
}

TEST_CASE("feedback text is stable and lists the histogram") {
    EvalAggregates agg;
    agg.steps = 1;
    agg.episodes = 1;
    agg.action_counts = {{7, 0, 2}};
    FeedbackReport report = build_feedback(agg);
    const std::string a = render_feedback_text(report);
    const std::string b = render_feedback_text(report);
    CHECK(a == b);
    CHECK(a.find("echelon 0: [7, 0, 2]") != std::string::npos);
    CHECK(a.find("Reward feedback") != std::string::npos);
}

TEST_CASE("reflect appends exactly one block with the program verbatim") {
    PromptBundle bundle = default_prompt_bundle(tiny_scenario());
    FeedbackReport report;
    report.action_histogram = {{3, 2}};
    reflect(bundle, "action_quantity <= 2 * mean_demand", 12.25, report);
    REQUIRE(bundle.reflections.size() == 1);
    CHECK(bundle.reflections[0].find("action_quantity <= 2 * mean_demand") != std::string::npos);
    CHECK(bundle.reflections[0].find("12.25") != std::string::npos);
    reflect(bundle, "1", 1.0, report);
    CHECK(bundle.reflections.size() == 2);
}

TEST_CASE("single all-allow candidate reproduces plain training bitwise") {
    ScenarioConfig scenario = tiny_scenario();
    EvolutionConfig config = tiny_config(1, 1);
    MockBackend mock({"```\n1\n```"});
    SeededRng rng(77, 0);
    EvolutionOutcome outcome = run_evolution(config, scenario, mock, nullptr, rng);
    REQUIRE(outcome.iterations.size() == 1);
    const CandidateOutcome& candidate = outcome.iterations[0].candidates[0];
    REQUIRE(candidate.trained);

    // plain training with the matching stream and the same trace
    const DemandTrace trace = resolve_demand(scenario, rng.fork(1));
    TrainConfig train_config = config.train;
    train_config.total_steps = config.steps_per_iteration;
    EnvFactory factory = [&scenario, &trace]() {
        return std::make_unique<InventoryRolloutEnv>(scenario, trace);
    };
    TrainResult plain =
        train(factory, nullptr, train_config, rng.fork(candidate_stream(0, 0)));
    CHECK(candidate.checkpoint_scores == plain.checkpoint_scores);
    CHECK(outcome.champion_params.flat() == plain.params.flat());
}

TEST_CASE("argmax selection with deterministic index tie-break") {
    auto candidate = [](int index, double score) {
        CandidateOutcome c;
        c.index = index;
        c.final_score = score;
        c.trained = std::isfinite(score);
        return c;
    };
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(select_best({candidate(0, 1.0), candidate(1, 2.0), candidate(2, 2.0)}) == 1);
    CHECK(select_best({candidate(0, 5.0), candidate(1, 5.0)}) == 0);
    CHECK(select_best({candidate(0, -inf), candidate(1, 3.0)}) == 1);
    CHECK(select_best({candidate(0, -inf), candidate(1, -inf)}) == -1);
    CHECK(select_best({candidate(0, -2.0), candidate(1, -1.0), candidate(2, -1.0)}) == 1);

    // end to end: the better program must be selected
    ScenarioConfig scenario = tiny_scenario();
    EvolutionConfig config = tiny_config(1, 2);
    MockBackend mock({"```\n1\n```", "```\n1\n```"});
    EvolutionOutcome outcome = run_evolution(config, scenario, mock, nullptr, SeededRng(5, 0));
    const IterationResult& iter = outcome.iterations[0];
    REQUIRE(iter.best_index >= 0);
    for (const auto& c : iter.candidates) CHECK(c.final_score <= iter.best_score);
}

TEST_CASE("rejected candidates never train and score minus infinity") {
    ScenarioConfig scenario = tiny_scenario();
    EvolutionConfig config = tiny_config(1, 3);
    MockBackend mock({
        "```\nnonsense_identifier > 1\n```",
        "no fenced block",
        "```\naction_quantity <= 2 * mean_demand\n```",
    });
    EvolutionOutcome outcome = run_evolution(config, scenario, mock, nullptr, SeededRng(6, 0));
    const IterationResult& iter = outcome.iterations[0];
    CHECK_FALSE(iter.candidates[0].accepted);
    CHECK_FALSE(iter.candidates[0].trained);
    CHECK(iter.candidates[0].final_score == -std::numeric_limits<double>::infinity());
    CHECK_FALSE(iter.candidates[1].accepted);
    CHECK(iter.candidates[2].accepted);
    CHECK(iter.best_index == 2);
}

TEST_CASE("a fully rejected batch is retried once then aborts") {
    ScenarioConfig scenario = tiny_scenario();
    EvolutionConfig config = tiny_config(1, 2);
    MockBackend mock({"nope", "still nope"});
    try {
        run_evolution(config, scenario, mock, nullptr, SeededRng(7, 0));
        FAIL("expected an abort");
    } catch (const EvolutionAbort& e) {
        CHECK(!e.diagnostics.empty());
        CHECK(mock.call_count() == 4);  // two attempts of two candidates
    }
}

TEST_CASE("retention training starts candidates from the previous best") {
    ScenarioConfig scenario = tiny_scenario();
    TempDir dir("espark_retention_test");
    EvolutionConfig config = tiny_config(2, 1);
    config.config_hash = 99;
    MockBackend mock({"```\n1\n```"});
    SeededRng rng(123, 0);
    EvolutionOutcome outcome = run_evolution(config, scenario, mock, nullptr, rng, dir.path.string());
    REQUIRE(outcome.iterations.size() == 2);

    // replay iteration 2's candidate manually: same stream, initial
    // params = iteration 1 best checkpoint
    PolicyParams iter1_best =
        load_params((dir.path / "checkpoints" / "iter_001_best.bin").string(), 99);
    const DemandTrace trace = resolve_demand(scenario, rng.fork(1));
    TrainConfig train_config = config.train;
    train_config.total_steps = config.steps_per_iteration;
    EnvFactory factory = [&scenario, &trace]() {
        return std::make_unique<InventoryRolloutEnv>(scenario, trace);
    };
    auto program = std::make_shared<dsl::MaskProgram>(dsl::parse("1"));
    MaskSource mask = [program, &scenario](const Observation& obs, SeededRng&) {
        return dsl::evaluate(*program, obs, scenario.action_multipliers);
    };
    TrainResult replay = train(factory, mask, train_config, rng.fork(candidate_stream(1, 0)),
                               nullptr, iter1_best);
    CHECK(replay.checkpoint_scores == outcome.iterations[1].candidates[0].checkpoint_scores);
}

TEST_CASE("iteration records persist before the next iteration starts") {
    ScenarioConfig scenario = tiny_scenario();
    TempDir dir("espark_persist_test");
    EvolutionConfig config = tiny_config(3, 1);
    config.stop_after_iteration = 1;
    MockBackend mock({"```\n1\n```"});
    EvolutionOutcome outcome =
        run_evolution(config, scenario, mock, nullptr, SeededRng(9, 0), dir.path.string());
    CHECK_FALSE(outcome.completed);
    CHECK(fs::exists(dir.path / "iterations" / "iter_001.json"));
    CHECK_FALSE(fs::exists(dir.path / "iterations" / "iter_002.json"));
    CHECK(fs::exists(dir.path / "checkpoints" / "iter_001_best.bin"));
    CHECK(fs::exists(dir.path / "checkpoints" / "champion.bin"));
    CHECK(fs::exists(dir.path / "feedback" / "iter_001.txt"));
}

TEST_CASE("killed runs resume into the identical outcome") {
    ScenarioConfig scenario = tiny_scenario();
    EvolutionConfig config = tiny_config(3, 2);
    config.config_hash = 7;
    const std::vector<std::string> script = {"```\n1\n```",
                                             "```\naction_quantity <= 2 * mean_demand\n```",
                                             "```\naction_index == 0\n```"};

    TempDir full_dir("espark_resume_full");
    MockBackend full_mock(script);
    EvolutionOutcome full = run_evolution(config, scenario, full_mock, nullptr, SeededRng(11, 0),
                                          full_dir.path.string());

    TempDir part_dir("espark_resume_part");
    EvolutionConfig partial = config;
    partial.stop_after_iteration = 1;
    MockBackend part_mock(script);
    EvolutionOutcome interrupted = run_evolution(partial, scenario, part_mock, nullptr,
                                                 SeededRng(11, 0), part_dir.path.string());
    REQUIRE_FALSE(interrupted.completed);

    EvolutionConfig resumed_config = config;
    resumed_config.resume = true;
    MockBackend resume_mock(script);  // fresh backend; fast-forward restores the cursor
    EvolutionOutcome resumed = run_evolution(resumed_config, scenario, resume_mock, nullptr,
                                             SeededRng(11, 0), part_dir.path.string());
    REQUIRE(resumed.completed);
    CHECK(resumed.champion_score == full.champion_score);
    CHECK(resumed.final_test_profit == full.final_test_profit);
    CHECK(resumed.champion_params.flat() == full.champion_params.flat());
    REQUIRE(resumed.iterations.size() == full.iterations.size());
    for (std::size_t i = 0; i < full.iterations.size(); ++i) {
        CHECK(resumed.iterations[i].best_index == full.iterations[i].best_index);
        CHECK(resumed.iterations[i].best_score == full.iterations[i].best_score);
    }
}

TEST_CASE("recorded best series never decreases") {
    ScenarioConfig scenario = tiny_scenario();
    EvolutionConfig config = tiny_config(3, 2);
    MockBackend mock({"```\n1\n```", "```\naction_quantity <= 2 * mean_demand\n```"});
    EvolutionOutcome outcome = run_evolution(config, scenario, mock, nullptr, SeededRng(13, 0));
    double previous = -std::numeric_limits<double>::infinity();
    for (const auto& iter : outcome.iterations) {
        CHECK(iter.champion_score >= previous);
        previous = iter.champion_score;
    }
    CHECK(outcome.champion_score == previous);
}

TEST_CASE("llm ablation cycles the fixed pool without reflection") {
    ScenarioConfig scenario = tiny_scenario();
    EvolutionConfig config = tiny_config(2, 2);
    config.llm_ablation = true;
    config.ablation_pool = {"1", "action_multiplier <= 2", "action_index == 0"};
    MockBackend mock({"never used"});
    EvolutionOutcome outcome = run_evolution(config, scenario, mock, nullptr, SeededRng(15, 0));
    CHECK(mock.call_count() == 0);
    REQUIRE(outcome.iterations.size() == 2);
    CHECK(outcome.iterations[0].reflection_block.empty());
    CHECK(outcome.iterations[0].candidates[0].program_text == "1");
    CHECK(outcome.iterations[1].candidates[0].program_text != "1");  // pool advanced
}
