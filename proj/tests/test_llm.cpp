#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "espark/llm.hpp"

using namespace espark;

namespace {

ScenarioConfig scenario_for_prompts() {
    ScenarioConfig c;
    c.echelons = 1;
    c.skus = 2;
    c.capacity_per_echelon = 200;
    c.lead_time.assign(1, std::vector<int>(2, 2));
    return c;
}

}  // namespace

TEST_CASE("initial prompt carries the documented sections in order") {
    PromptBundle bundle = default_prompt_bundle(scenario_for_prompts());
    const auto messages = assemble_prompt(bundle);
    REQUIRE(messages.size() == 5);
    CHECK(messages[0].role == "system");
    CHECK(messages[1].content.find("Observation fields") != std::string::npos);
    CHECK(messages[2].content.find("Task:") != std::string::npos);
    CHECK(messages[3].content.find("expr") != std::string::npos);  // grammar
    CHECK(messages[4].content.find("fenced code block") != std::string::npos);
}

TEST_CASE("reflection blocks append in iteration order") {
    PromptBundle bundle = default_prompt_bundle(scenario_for_prompts());
    bundle.reflections = {"block one", "block two", "block three"};
    const auto messages = assemble_prompt(bundle);
    REQUIRE(messages.size() == 8);
    CHECK(messages[5].content == "block one");
    CHECK(messages[6].content == "block two");
    CHECK(messages[7].content == "block three");
}

TEST_CASE("budget eviction drops the oldest blocks first") {
    PromptBundle bundle = default_prompt_bundle(scenario_for_prompts());
    std::size_t base = 0;
    for (const auto& m : assemble_prompt(bundle)) base += m.content.size();
    bundle.budget_chars = base + 250;
    bundle.reflections = {std::string(200, 'a'), std::string(200, 'b')};
    const auto messages = assemble_prompt(bundle);
    REQUIRE(messages.size() == 6);
    CHECK(messages[5].content == std::string(200, 'b'));

    bundle.budget_chars = base + 100;  // even the latest cannot fit
    CHECK_THROWS_AS(assemble_prompt(bundle), std::invalid_argument);
}

TEST_CASE("fenced block extraction") {
    CHECK(extract_fenced_block("before\n```\n1 + 2\n```\nafter") == "1 + 2");
    CHECK(extract_fenced_block("```text\naction_index == 0\n```") == "action_index == 0");
    CHECK(!extract_fenced_block("no code here").has_value());
    CHECK(!extract_fenced_block("``` unterminated\nx").has_value());
}

TEST_CASE("mock backend cycles its script and logs requests") {
    MockBackend mock({"a", "b"});
    std::vector<std::string> lines;
    mock.set_traffic_logger([&](const std::string& line) { lines.push_back(line); });
    CHECK(mock.complete({{"user", "hi"}}, 0.7).content == "a");
    CHECK(mock.complete({{"user", "hi"}}, 0.7).content == "b");
    CHECK(mock.complete({{"user", "hi"}}, 0.7).content == "a");
    CHECK(mock.call_count() == 3);
    CHECK(mock.requests().size() == 3);
    CHECK(lines.size() == 3);

    MockBackend fresh({"a", "b"});
    fresh.fast_forward(2);
    CHECK(fresh.complete({}, 0.7).content == "a");  // resumes the cycle
}

TEST_CASE("generate_candidates accepts only checked programs") {
    PromptBundle bundle = default_prompt_bundle(scenario_for_prompts());
    MockBackend mock({
        "sure!\n```\naction_quantity <= 2 * mean_demand\n```",
        "no code block at all",
        "```\nbad_identifier > 3\n```",
        "```\n1 +\n```",
    });
    const auto records = generate_candidates(bundle, 4, mock);
    REQUIRE(records.size() == 4);
    CHECK(records[0].accepted);
    CHECK(records[0].program_text == "action_quantity <= 2 * mean_demand");
    CHECK_FALSE(records[1].accepted);
    CHECK(records[1].diagnostics[0].find("fenced") != std::string::npos);
    CHECK_FALSE(records[2].accepted);
    CHECK(records[2].diagnostics[0].find("bad_identifier") != std::string::npos);
    CHECK_FALSE(records[3].accepted);
    for (const auto& rec : records)
        if (rec.accepted) CHECK(rec.program.has_value());
}

TEST_CASE("checker round can rescue a rejected candidate") {
    PromptBundle bundle = default_prompt_bundle(scenario_for_prompts());
    MockBackend generator({"```\nstock_level > 2\n```"});
    MockBackend checker({"corrected:\n```\nin_stock > 2\n```"});
    const auto records = generate_candidates(bundle, 1, generator, &checker);
    REQUIRE(records.size() == 1);
    CHECK(records[0].accepted);
    CHECK(records[0].program_text == "in_stock > 2");
    CHECK(records[0].backend_calls == 2);
    // the checker saw the flawed program and its diagnostics
    REQUIRE(checker.requests().size() == 1);
    bool saw_program = false, saw_diag = false;
    for (const auto& m : checker.requests()[0]) {
        if (m.content.find("stock_level > 2") != std::string::npos) saw_program = true;
        if (m.content.find("unknown identifier") != std::string::npos) saw_diag = true;
    }
    CHECK(saw_program);
    CHECK(saw_diag);
}

TEST_CASE("mock script files load and validate") {
    const std::string path = "test_mock_script_tmp.json";
    {
        std::ofstream out(path);
        out << R"({"responses": ["```\n1\n```", "```\naction_index == 0\n```"]})";
    }
    const auto script = load_mock_script(path);
    REQUIRE(script.size() == 2);
    CHECK(script[0].find("```") == 0);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_mock_script(path), std::invalid_argument);
}

TEST_CASE("http backend speaks the chat-completions wire protocol") {
    httplib::Server server;
    std::atomic<int> hits{0};
    nlohmann::json captured_body;
    std::string captured_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        hits += 1;
        captured_body = nlohmann::json::parse(req.body);
        captured_auth = req.get_header_value("Authorization");
        nlohmann::json reply = {
            {"model", "test-model"},
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "```\n1\n```"}}}}}},
            {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 5}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&]() { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));

    setenv("ESPARK_TEST_KEY", "secret-token", 1);
    HttpBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions",
                        "test-model", "ESPARK_TEST_KEY");
    ChatResponse response = backend.complete({{"system", "s"}, {"user", "u"}}, 0.7);
    CHECK(response.content == "```\n1\n```");
    CHECK(response.model_id == "test-model");
    CHECK(response.prompt_tokens == 12);
    CHECK(response.completion_tokens == 5);
    CHECK(hits == 1);
    CHECK(captured_auth == "Bearer secret-token");
    CHECK(captured_body.at("model") == "test-model");
    CHECK(captured_body.at("temperature") == doctest::Approx(0.7));
    CHECK(captured_body.at("n") == 1);
    REQUIRE(captured_body.at("messages").size() == 2);
    CHECK(captured_body["messages"][0]["role"] == "system");
    CHECK(captured_body["messages"][1]["content"] == "u");

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend retries transient failures with backoff") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::atomic<bool> always_fail{false};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        const int n = ++hits;
        if (always_fail || n < 3) {
            res.status = 500;
            return;
        }
        nlohmann::json reply = {
            {"choices", {{{"message", {{"content", "ok"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&]() { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));

    RetryPolicy fast;
    fast.initial_delay_ms = 5;
    fast.multiplier = 2.0;
    HttpBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions",
                        "m", "ESPARK_UNSET_KEY", fast);
    CHECK(backend.complete({{"user", "u"}}, 0.7).content == "ok");
    CHECK(hits == 3);

    always_fail = true;  // exhaust all attempts; expect BackendError
    CHECK_THROWS_AS(backend.complete({{"user", "u"}}, 0.7), BackendError);

    server.stop();
    server_thread.join();
}

TEST_CASE("backend transport failures become rejected candidates") {
    PromptBundle bundle = default_prompt_bundle(scenario_for_prompts());
    RetryPolicy fast;
    fast.attempts = 1;
    fast.initial_delay_ms = 1;
    HttpBackend dead("http://127.0.0.1:1/v1/chat/completions", "m", "ESPARK_UNSET_KEY", fast);
    const auto records = generate_candidates(bundle, 2, dead);
    REQUIRE(records.size() == 2);
    CHECK_FALSE(records[0].accepted);
    CHECK(records[0].diagnostics[0].find("backend failure") != std::string::npos);
}
