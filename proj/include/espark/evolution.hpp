#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "espark/llm.hpp"
#include "espark/trainer.hpp"

namespace espark {

/// Per-candidate policy-performance summary rendered into the
/// reflection prompt.
struct FeedbackReport {
    // mean reward components per step, summed over agents
    double sales_profit_per_step = 0.0;
    double order_cost_per_step = 0.0;
    double holding_cost_per_step = 0.0;
    double backlog_cost_per_step = 0.0;
    double excess_cost_per_step = 0.0;
    double total_per_step = 0.0;
    double fulfillment_ratio = 1.0;
    double overflow_ratio = 0.0;
    std::vector<std::vector<long long>> action_histogram;  // [echelon][action]
    double total_profit = 0.0;  // mean per evaluation episode
};

FeedbackReport build_feedback(const EvalAggregates& aggregates);

/// Stable text rendering (component table + histogram table).
std::string render_feedback_text(const FeedbackReport& report);

/// Mean of the last min(m, length) checkpoint scores. Throws
/// std::invalid_argument on an empty series (failed candidate).
double score(const std::vector<double>& checkpoints, int m);

/// Appends the reflection block for the chosen program + feedback.
void reflect(PromptBundle& bundle, const std::string& best_program_text, double best_score,
             const FeedbackReport& report);

struct CandidateOutcome {
    int index = 0;
    std::string program_text;  // canonical rendering
    bool accepted = false;
    std::vector<std::string> diagnostics;
    bool trained = false;
    std::string failure;
    std::vector<double> checkpoint_scores;
    double final_score = -std::numeric_limits<double>::infinity();
    FeedbackReport feedback;
    long long mask_fallbacks = 0;
};

/// Argmax over finite candidate scores; ties break toward the lowest
/// candidate index. Returns -1 when every candidate failed.
int select_best(const std::vector<CandidateOutcome>& candidates);

struct IterationResult {
    int iteration = 0;  // 1-based
    std::vector<CandidateOutcome> candidates;
    int best_index = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    double champion_score = -std::numeric_limits<double>::infinity();
    int champion_iteration = 0;
    std::string reflection_block;
    long long backend_calls_cumulative = 0;
};

struct EvolutionConfig {
    int iterations = 10;  // N
    int batch = 4;        // K
    bool retention = true;
    long long steps_per_iteration = 40'000;
    int score_checkpoints = 3;  // m
    TrainConfig train;
    GenerationConfig generation;
    int jobs = 0;  // parallel candidate trainings; 0 = hardware concurrency
    std::uint64_t config_hash = 0;
    bool resume = false;
    /// Test hook: stop (as if killed) after persisting this iteration.
    std::optional<int> stop_after_iteration;
    /// "no LLM" ablation: candidates cycle through a fixed program pool
    /// and no reflection happens.
    bool llm_ablation = false;
    std::vector<std::string> ablation_pool;
};

class EvolutionAbort : public std::runtime_error {
public:
    EvolutionAbort(const std::string& message, std::vector<std::string> diagnostics)
        : std::runtime_error(message), diagnostics(std::move(diagnostics)) {}
    std::vector<std::string> diagnostics;
};

struct EvolutionOutcome {
    explicit EvolutionOutcome(PolicyParams params) : champion_params(std::move(params)) {}

    PolicyParams champion_params;
    double champion_score = -std::numeric_limits<double>::infinity();
    int champion_iteration = 0;
    std::string champion_program;
    std::vector<IterationResult> iterations;
    double final_test_profit = 0.0;  // fresh held-out evaluation of the champion
    long long backend_calls = 0;
    bool completed = false;  // false when stop_after_iteration fired early
};

/// The evolutionary loop: generate K exploration functions, train one
/// policy per accepted candidate, select by checkpoint score, reflect,
/// repeat. `run_dir` (when set) receives a resumable audit trail; every
/// iteration is persisted before the next begins.
EvolutionOutcome run_evolution(const EvolutionConfig& config, const ScenarioConfig& scenario,
                               ChatBackend& generator, ChatBackend* checker, SeededRng rng,
                               const std::string& run_dir = "");

/// Stream id the evolution loop assigns to candidate k of iteration i
/// (0-based); candidate (0, 0) matches a plain training run's stream so
/// the two are bit-identical under an identity exploration function.
std::uint64_t candidate_stream(int iteration, int candidate);

}  // namespace espark
