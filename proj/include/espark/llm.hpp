#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "espark/dsl.hpp"
#include "espark/types.hpp"

namespace espark {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct ChatResponse {
    std::string content;
    std::string model_id;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Verbatim traffic sink; the run layer points it at a JSONL file.
using TrafficLogger = std::function<void(const std::string& jsonl_line)>;

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const std::vector<ChatMessage>& messages, double temperature) = 0;
    virtual void set_traffic_logger(TrafficLogger logger) = 0;
    /// Resumed runs replay this many historical calls; only stateful
    /// (scripted) backends care.
    virtual void fast_forward(long) {}
};

/// Prompt state carried across evolution iterations. Reflection blocks
/// are appended, never rewritten; assembly drops the oldest blocks when
/// the size budget would be exceeded.
struct PromptBundle {
    std::string system_generator;
    std::string system_checker;
    std::string rl_formulation;
    std::string task_description;
    std::string grammar;
    std::string output_format;
    std::vector<std::string> reflections;  // ordered by iteration
    std::size_t budget_chars = 100'000;
};

/// The default prompt content for the inventory task.
PromptBundle default_prompt_bundle(const ScenarioConfig& scenario);

/// Ordered message list: system, RL formulation, task description,
/// grammar, output format, then reflection blocks (oldest evicted first
/// when over budget). Throws std::invalid_argument when even the latest
/// block cannot fit.
std::vector<ChatMessage> assemble_prompt(const PromptBundle& bundle);

struct GenerationRecord {
    int iteration = 0;
    int candidate_index = 0;
    std::string raw_completion;
    std::string program_text;
    std::vector<std::string> diagnostics;
    bool accepted = false;
    std::string model_id;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    int backend_calls = 0;
    std::optional<dsl::MaskProgram> program;  // set iff accepted
};

struct GenerationConfig {
    double temperature = 0.7;
    int checker_rounds = 1;  // revision rounds when a checker backend is set
};

/// Extracts the first fenced code block; nullopt when there is none.
std::optional<std::string> extract_fenced_block(const std::string& completion);

/// Samples K candidate programs, statically checks each, and runs the
/// optional checker-model revision round for candidates that fail.
/// Transport failures surface as rejected records, never exceptions.
std::vector<GenerationRecord> generate_candidates(const PromptBundle& bundle, int k,
                                                  ChatBackend& generator,
                                                  ChatBackend* checker = nullptr,
                                                  const GenerationConfig& config = {},
                                                  int iteration = 0);

/// Deterministic scripted backend: returns responses in order, cycling;
/// records every request for assertions and supports fast-forward so
/// resumed runs replay the same responses.
class MockBackend final : public ChatBackend {
public:
    explicit MockBackend(std::vector<std::string> script);

    ChatResponse complete(const std::vector<ChatMessage>& messages, double temperature) override;
    void set_traffic_logger(TrafficLogger logger) override { logger_ = std::move(logger); }

    long call_count() const { return call_count_; }
    void fast_forward(long calls) override { call_count_ = calls; }
    const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }

private:
    std::vector<std::string> script_;
    long call_count_ = 0;
    std::vector<std::vector<ChatMessage>> requests_;
    TrafficLogger logger_;
};

struct RetryPolicy {
    int attempts = 3;
    int initial_delay_ms = 250;
    double multiplier = 4.0;
};

/// Chat-completions client: POST {model, messages, temperature, n} with
/// bearer auth read from an environment variable (never a flag).
class HttpBackend final : public ChatBackend {
public:
    HttpBackend(std::string endpoint_url, std::string model,
                std::string api_key_env = "ESPARK_API_KEY", RetryPolicy retry = {});

    ChatResponse complete(const std::vector<ChatMessage>& messages, double temperature) override;
    void set_traffic_logger(TrafficLogger logger) override { logger_ = std::move(logger); }

private:
    std::string scheme_host_;
    std::string path_;
    std::string model_;
    std::string api_key_;
    RetryPolicy retry_;
    TrafficLogger logger_;
    long seq_ = 0;
};

std::vector<std::string> load_mock_script(const std::string& path);

}  // namespace espark
