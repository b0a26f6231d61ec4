#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "support.hpp"
#include "toolrobust/backend.hpp"

using namespace toolrobust;

namespace {

PerturbedCase demo_case(const std::string& id) {
    for (const TestCase& c : parse_cases(read_file(testsupport::data_path("demo/catalog.json"))))
        if (c.id == id) return perturb_case(c, NoiseLevel::Clean, std::nullopt, 0);
    throw std::runtime_error("no demo case " + id);
}

std::string flatten(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (const auto& m : messages) out += "=== " + std::string(to_string(m.role)) + "\n" + m.content + "\n";
    return out;
}

// Local chat-completion stub. Fails the first `failures` requests with `fail_status`.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    int failures = 0;
    int fail_status = 503;
    std::string last_auth;
    json last_body;
    std::mutex mu;

    StubServer() {
        server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++requests;
            {
                std::lock_guard lock(mu);
                last_auth = req.get_header_value("Authorization");
                last_body = json::parse(req.body);
            }
            if (n <= failures) {
                res.status = fail_status;
                res.set_content("{}", "application/json");
                return;
            }
            json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "reply " + std::to_string(n)}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
    BackendConfig config() const {
        BackendConfig c;
        c.kind = BackendKind::Http;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
        c.model_name = "stub-model";
        c.retry_base_delay_ms = 1;
        c.timeout_seconds = 5;
        c.api_key_env = "TOOLROBUST_TEST_KEY";
        return c;
    }
};

class CountingBackend : public CompletionBackend {
public:
    std::string complete(const std::string& case_id, const std::vector<ChatMessage>&) override {
        const int now = ++in_flight_;
        int seen = max_seen_.load();
        while (now > seen && !max_seen_.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --in_flight_;
        if (case_id.ends_with("!")) throw BackendError(case_id, "scripted failure");
        return "answer for " + case_id;
    }
    int max_seen() const { return max_seen_.load(); }

private:
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_seen_{0};
};

std::vector<PerturbedCase> numbered_cases(std::size_t n) {
    std::vector<PerturbedCase> out;
    for (std::size_t i = 0; i < n; ++i) {
        PerturbedCase c;
        c.id = "k" + std::to_string(i) + (i % 7 == 3 ? "!" : "");
        c.query = "q";
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

TEST_CASE("tool rendering") {
    Tool t{"get_weather", "Weather for a city.",
           {{"city", "City name.", ValueType::String, true, std::nullopt},
            {"unit", "Unit.", ValueType::Enum, false, std::vector<std::string>{"celsius", "fahrenheit"}}}};
    CHECK(render_tool(t) ==
          "Tool: get_weather\nDescription: Weather for a city.\nParameters:\n"
          "- city (string, Required): City name.\n"
          "- unit (enum: celsius|fahrenheit, Optional): Unit.");
    CHECK(render_tool(Tool{"noop", "Nothing.", {}}) == "Tool: noop\nDescription: Nothing.\nParameters: none");
    const std::string doc = render_tool_document({t});
    CHECK(doc.find("Tool: ask_to_user") != std::string::npos);
    CHECK(doc.find("Tool: finish") != std::string::npos);
    CHECK(render_action({std::string("check"), "get_weather", {{"city", "Paris"}}, ""}) ==
          "Thought: check\nAction: get_weather\nAction Input: {\"city\":\"Paris\"}");
}

TEST_CASE("inference prompt matches the golden file") {
    const auto messages = build_prompt(demo_case("c6"));
    REQUIRE(messages.size() == 6);
    CHECK(messages[0].role == Role::System);
    CHECK(messages[1].content.ends_with("\nBegin!"));
    CHECK(messages[2].role == Role::Assistant);
    CHECK(messages[3].content.starts_with("Observation: "));
    CHECK(flatten(messages) == read_file(testsupport::test_data_path("prompt_c6.golden")));
}

TEST_CASE("perturbed names reach the prompt, descriptions stay") {
    const PerturbedCase clean = demo_case("c3");
    TestCase source{clean.id, clean.scenario, clean.query, clean.tools, clean.gold, clean.prior_turns};
    const PerturbedCase noisy = perturb_case(source, NoiseLevel::Medium, PerturbationTarget::ToolNames, 4);
    const std::string prompt = build_prompt(noisy)[0].content;
    for (const Tool& t : noisy.tools) {
        CHECK(prompt.find("Tool: " + t.name + "\n") != std::string::npos);
        CHECK(prompt.find("Description: " + t.description + "\n") != std::string::npos);
    }
}

TEST_CASE("query expansion and trajectory prompts") {
    const auto tools = demo_case("c1").tools;
    const auto exp = build_query_expansion_prompt(tools, {"Weather in Rome?", "Quotes for IBM?"}, 5);
    REQUIRE(exp.size() == 2);
    CHECK(exp[0].content.find("Tool: get_weather") != std::string::npos);
    CHECK(exp[1].content.find("generate 5 diverse queries") != std::string::npos);
    CHECK(exp[1].content.find("1. Weather in Rome?\n2. Quotes for IBM?") != std::string::npos);
    const auto traj = build_trajectory_prompt("Find a vegan pasta recipe");
    CHECK(traj[1].content == "Find a vegan pasta recipe\nBegin!");
}

TEST_CASE("scripted backend") {
    ScriptedBackend backend(std::map<std::string, std::string>{{"a", "Action: f\nAction Input: {}"}});
    CHECK(backend.complete("a", {}) == "Action: f\nAction Input: {}");
    CHECK_THROWS_AS(backend.complete("b", {}), FixtureError);
}

TEST_CASE("configuration checks") {
    BackendConfig c;
    CHECK(validate_config(c).size() == 1);  // scripted without a file
    c.kind = BackendKind::Http;
    c.concurrency_limit = 0;
    CHECK(validate_config(c).size() == 3);
    c.endpoint = "http://x";
    c.model_name = "m";
    c.concurrency_limit = 2;
    CHECK(validate_config(c).empty());
    c.endpoint = "ftp://x";
    CHECK_THROWS_AS(make_backend(c), std::invalid_argument);
}

TEST_CASE("http backend retries transient failures") {
    StubServer stub;
    stub.failures = 2;
    ::setenv("TOOLROBUST_TEST_KEY", "secret", 1);
    HttpBackend backend(stub.config());
    const std::vector<ChatMessage> messages = {{Role::System, "sys"}, {Role::User, "hi"}};
    CHECK(backend.complete("x", messages) == "reply 3");
    CHECK(stub.requests == 3);
    CHECK(stub.last_auth == "Bearer secret");
    CHECK(stub.last_body["model"] == "stub-model");
    CHECK(stub.last_body["temperature"] == 0.0);
    CHECK(stub.last_body["messages"][1] == json{{"role", "user"}, {"content", "hi"}});
}

TEST_CASE("http backend gives up after the retry budget") {
    StubServer stub;
    stub.failures = 100;
    stub.fail_status = 429;
    BackendConfig c = stub.config();
    c.max_retries = 2;
    HttpBackend backend(c);
    CHECK_THROWS_WITH_AS(backend.complete("x", {}), "case 'x': HTTP 429", BackendError);
    CHECK(stub.requests == 3);
}

TEST_CASE("http backend does not retry client errors") {
    StubServer stub;
    stub.failures = 100;
    stub.fail_status = 400;
    HttpBackend backend(stub.config());
    CHECK_THROWS_AS(backend.complete("x", {}), BackendError);
    CHECK(stub.requests == 1);
}

TEST_CASE("http backend reports an unreachable endpoint") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    BackendConfig c;
    c.kind = BackendKind::Http;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port);
    c.model_name = "m";
    c.max_retries = 1;
    c.retry_base_delay_ms = 1;
    c.timeout_seconds = 1;
    HttpBackend backend(c);
    CHECK_THROWS_AS(backend.complete("x", {}), BackendError);
}

TEST_CASE("batch runs respect the in-flight limit and keep input order") {
    const auto cases = numbered_cases(40);
    for (int limit : {1, 3, 8}) {
        CountingBackend backend;
        std::vector<std::string> callback_order;
        const auto results = run_batch(cases, backend, limit, [&](const BatchResult& r) { callback_order.push_back(r.case_id); });
        CHECK(backend.max_seen() <= limit);
        REQUIRE(results.size() == cases.size());
        CHECK(callback_order.size() == cases.size());
        for (std::size_t i = 0; i < cases.size(); ++i) {
            CHECK(results[i].case_id == cases[i].id);
            if (cases[i].id.ends_with("!")) {
                CHECK(results[i].error.has_value());
                CHECK_FALSE(results[i].text.has_value());
            } else {
                CHECK(results[i].text == "answer for " + cases[i].id);
            }
        }
    }
}

TEST_CASE("batch over http with concurrency 1 and 8 gives the same answers") {
    StubServer stub;
    HttpBackend backend(stub.config());
    std::vector<PerturbedCase> cases = numbered_cases(16);
    for (auto& c : cases) c.id = c.id.ends_with("!") ? c.id.substr(0, c.id.size() - 1) : c.id;
    const auto serial = run_batch(cases, backend, 1);
    const auto parallel = run_batch(cases, backend, 8);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        CHECK(serial[i].text.has_value());
        CHECK(parallel[i].text.has_value());
        CHECK(serial[i].case_id == parallel[i].case_id);
    }
    CHECK(stub.requests == 32);
}
