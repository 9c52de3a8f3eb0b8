#include "espark/llm.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace espark {

namespace {

using nlohmann::json;

std::string render_observation_table() {
    return
        "Observation fields available to the function (all numeric):\n"
        "  in_stock            on-hand units for this SKU at this warehouse\n"
        "  in_transit          units ordered and shipped but not yet received\n"
        "  mean_demand         sliding-window mean of recent demand (units/step)\n"
        "  last_demand         demand seen in the previous step\n"
        "  unit_price          selling price per unit\n"
        "  unit_cost           procurement cost per unit\n"
        "  holding_cost_rate   cost per held unit per step\n"
        "  backlog_cost_rate   cost per unserved demand unit\n"
        "  capacity_remaining  free shared warehouse capacity (units)\n"
        "  echelon_index       warehouse tier, 0 = closest to customers\n"
        "  sku_index           SKU id within the warehouse\n"
        "  step_fraction       elapsed fraction of the episode, in [0, 1]\n";
}

}  // namespace

PromptBundle default_prompt_bundle(const ScenarioConfig& scenario) {
    PromptBundle bundle;
    bundle.system_generator =
        "You are an expert in inventory management and reinforcement learning. "
        "You write exploration functions that prune a replenishment agent's "
        "action space during training. Respond with a single expression in the "
        "provided language inside one fenced code block.";
    bundle.system_checker =
        "You review exploration functions for an inventory replenishment task. "
        "Verify the expression against the variable specification and the "
        "environment dynamics; if it is flawed, respond with a corrected "
        "expression in one fenced code block, otherwise repeat the original "
        "expression in one fenced code block.";

    std::ostringstream rl;
    rl << "Environment: a multi-echelon inventory game. Each agent controls one "
          "(warehouse, SKU) pair and places a replenishment order every step. "
          "Orders flow upstream and goods flow downstream with lead times. Each "
          "warehouse has a shared capacity; arrivals beyond free capacity are "
          "discarded at a cost. The team reward sums sales profit minus order, "
          "holding, backlog, and excess costs across all agents.\n\n";
    rl << "Scenario: " << scenario.echelons << " echelon(s), " << scenario.skus
       << " SKU(s), capacity " << scenario.capacity_per_echelon
       << " units per warehouse, horizon " << scenario.horizon << " steps.\n\n";
    rl << render_observation_table();
    rl << "\nActions: the agent picks one multiplier from {";
    for (std::size_t i = 0; i < scenario.action_multipliers.size(); ++i) {
        if (i) rl << ", ";
        rl << scenario.action_multipliers[i];
    }
    rl << "}; the order quantity is round(multiplier * mean_demand).\n";
    bundle.rl_formulation = rl.str();

    bundle.task_description =
        "Task: write an exploration function that decides, for one observation "
        "and one candidate action, whether the action stays available during "
        "training (nonzero result) or is pruned (zero result). Prune actions "
        "that waste cost or capacity while keeping enough choices to serve "
        "demand. The function is removed at execution time, so prune "
        "aggressively but never leave the agent without sensible options.";

    bundle.grammar = std::string("The expression language:\n\n") + std::string(dsl::grammar_text());

    bundle.output_format =
        "Output format: respond with exactly one expression in one fenced code "
        "block (```...```). No commentary inside the block. The expression is "
        "evaluated once per (observation, action) pair.";
    return bundle;
}

std::vector<ChatMessage> assemble_prompt(const PromptBundle& bundle) {
    std::vector<ChatMessage> base = {
        {"system", bundle.system_generator},
        {"user", bundle.rl_formulation},
        {"user", bundle.task_description},
        {"user", bundle.grammar},
        {"user", bundle.output_format},
    };
    std::size_t base_size = 0;
    for (const auto& m : base) base_size += m.content.size();

    // Oldest reflection blocks go first when the budget forces eviction;
    // the latest block is never dropped.
    std::size_t keep_from = 0;
    auto total_with = [&](std::size_t from) {
        std::size_t total = base_size;
        for (std::size_t i = from; i < bundle.reflections.size(); ++i)
            total += bundle.reflections[i].size();
        return total;
    };
    while (keep_from + 1 < bundle.reflections.size() && total_with(keep_from) > bundle.budget_chars)
        ++keep_from;
    if (total_with(keep_from) > bundle.budget_chars)
        throw std::invalid_argument("prompt exceeds the context budget even without history");

    for (std::size_t i = keep_from; i < bundle.reflections.size(); ++i)
        base.push_back({"user", bundle.reflections[i]});
    return base;
}

std::optional<std::string> extract_fenced_block(const std::string& completion) {
    const std::string fence = "```";
    const std::size_t open = completion.find(fence);
    if (open == std::string::npos) return std::nullopt;
    std::size_t body = completion.find('\n', open + fence.size());
    if (body == std::string::npos) return std::nullopt;
    ++body;
    const std::size_t close = completion.find(fence, body);
    if (close == std::string::npos) return std::nullopt;
    std::string text = completion.substr(body, close - body);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

namespace {

/// parse + check against the DSL; fills diagnostics and returns the
/// program when admissible.
std::optional<dsl::MaskProgram> vet_program(const std::string& text,
                                            std::vector<std::string>& diagnostics) {
    try {
        dsl::MaskProgram prog = dsl::parse(text);
        std::vector<dsl::Diagnostic> diags = dsl::check(prog);
        for (const auto& d : diags)
            diagnostics.push_back(std::to_string(d.loc.line) + ":" + std::to_string(d.loc.column) +
                                  ": " + d.message);
        if (!diags.empty()) return std::nullopt;
        return prog;
    } catch (const std::exception& e) {
        diagnostics.push_back(e.what());
        return std::nullopt;
    }
}

}  // namespace

std::vector<GenerationRecord> generate_candidates(const PromptBundle& bundle, int k,
                                                  ChatBackend& generator, ChatBackend* checker,
                                                  const GenerationConfig& config, int iteration) {
    if (k < 1) throw std::invalid_argument("candidate count must be >= 1");
    const std::vector<ChatMessage> prompt = assemble_prompt(bundle);

    std::vector<GenerationRecord> records;
    records.reserve(static_cast<std::size_t>(k));
    for (int candidate = 0; candidate < k; ++candidate) {
        GenerationRecord rec;
        rec.iteration = iteration;
        rec.candidate_index = candidate;
        try {
            ChatResponse response = generator.complete(prompt, config.temperature);
            rec.backend_calls += 1;
            rec.raw_completion = response.content;
            rec.model_id = response.model_id;
            rec.prompt_tokens += response.prompt_tokens;
            rec.completion_tokens += response.completion_tokens;
        } catch (const BackendError& e) {
            rec.diagnostics.push_back(std::string("backend failure: ") + e.what());
            records.push_back(std::move(rec));
            continue;
        }

        auto block = extract_fenced_block(rec.raw_completion);
        if (!block) {
            rec.diagnostics.push_back("no fenced code block in completion");
        } else {
            rec.program_text = *block;
            rec.program = vet_program(rec.program_text, rec.diagnostics);
        }

        // One checker revision round for candidates that did not pass.
        for (int round = 0; checker && !rec.program && round < config.checker_rounds; ++round) {
            std::vector<ChatMessage> review = {
                {"system", bundle.system_checker},
                {"user", bundle.rl_formulation},
                {"user", bundle.grammar},
            };
            std::ostringstream body;
            body << "Candidate exploration function:\n```\n"
                 << (rec.program_text.empty() ? rec.raw_completion : rec.program_text)
                 << "\n```\n";
            if (!rec.diagnostics.empty()) {
                body << "Reported problems:\n";
                for (const auto& d : rec.diagnostics) body << "- " << d << "\n";
            }
            review.push_back({"user", body.str()});
            try {
                ChatResponse revised = checker->complete(review, config.temperature);
                rec.backend_calls += 1;
                rec.prompt_tokens += revised.prompt_tokens;
                rec.completion_tokens += revised.completion_tokens;
                auto revised_block = extract_fenced_block(revised.content);
                if (revised_block) {
                    rec.diagnostics.clear();
                    rec.program_text = *revised_block;
                    rec.program = vet_program(rec.program_text, rec.diagnostics);
                } else {
                    rec.diagnostics.push_back("checker revision had no fenced code block");
                }
            } catch (const BackendError& e) {
                rec.diagnostics.push_back(std::string("checker backend failure: ") + e.what());
            }
        }

        rec.accepted = rec.program.has_value();
        records.push_back(std::move(rec));
    }
    return records;
}

MockBackend::MockBackend(std::vector<std::string> script) : script_(std::move(script)) {
    if (script_.empty()) throw std::invalid_argument("mock backend script must not be empty");
}

ChatResponse MockBackend::complete(const std::vector<ChatMessage>& messages, double temperature) {
    requests_.push_back(messages);
    const std::string& content = script_[static_cast<std::size_t>(call_count_ % static_cast<long>(script_.size()))];
    call_count_ += 1;
    if (logger_) {
        json line = {{"seq", call_count_},
                     {"backend", "mock"},
                     {"temperature", temperature},
                     {"request_messages", messages.size()},
                     {"response", content}};
        logger_(line.dump());
    }
    ChatResponse r;
    r.content = content;
    r.model_id = "mock";
    return r;
}

HttpBackend::HttpBackend(std::string endpoint_url, std::string model, std::string api_key_env,
                         RetryPolicy retry)
    : model_(std::move(model)), retry_(retry) {
    const std::size_t scheme = endpoint_url.find("://");
    if (scheme == std::string::npos)
        throw std::invalid_argument("backend url must include a scheme: " + endpoint_url);
    const std::size_t path_start = endpoint_url.find('/', scheme + 3);
    if (path_start == std::string::npos) {
        scheme_host_ = endpoint_url;
        path_ = "/v1/chat/completions";
    } else {
        scheme_host_ = endpoint_url.substr(0, path_start);
        path_ = endpoint_url.substr(path_start);
    }
    if (const char* key = std::getenv(api_key_env.c_str())) api_key_ = key;
}

ChatResponse HttpBackend::complete(const std::vector<ChatMessage>& messages, double temperature) {
    json body;
    body["model"] = model_;
    body["temperature"] = temperature;
    body["n"] = 1;
    body["messages"] = json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const std::string payload = body.dump();

    httplib::Client client(scheme_host_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    double delay_ms = retry_.initial_delay_ms;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
        auto res = client.Post(path_, headers, payload, "application/json");
        const long seq = ++seq_;
        if (res && res->status == 200) {
            if (logger_) {
                json line = {{"seq", seq},
                             {"backend", "http"},
                             {"attempt", attempt},
                             {"request", body},
                             {"status", res->status},
                             {"response", res->body}};
                logger_(line.dump());
            }
            json parsed;
            try {
                parsed = json::parse(res->body);
                ChatResponse out;
                out.content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
                out.model_id = parsed.value("model", model_);
                if (parsed.contains("usage")) {
                    out.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
                    out.completion_tokens = parsed["usage"].value("completion_tokens", 0);
                }
                return out;
            } catch (const std::exception& e) {
                last_error = std::string("malformed backend response: ") + e.what();
            }
        } else {
            last_error = res ? "http status " + std::to_string(res->status)
                             : "transport error: " + httplib::to_string(res.error());
            if (logger_) {
                json line = {{"seq", seq},
                             {"backend", "http"},
                             {"attempt", attempt},
                             {"request", body},
                             {"status", res ? res->status : -1},
                             {"error", last_error}};
                logger_(line.dump());
            }
        }
        if (attempt < retry_.attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(delay_ms)));
            delay_ms *= retry_.multiplier;
        }
    }
    throw BackendError(last_error);
}

std::vector<std::string> load_mock_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open mock script: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument("mock script parse error in " + path + ": " + e.what());
    }
    std::vector<std::string> script;
    for (const auto& entry : j.at("responses")) script.push_back(entry.get<std::string>());
    if (script.empty()) throw std::invalid_argument("mock script has no responses: " + path);
    return script;
}

}  // namespace espark
