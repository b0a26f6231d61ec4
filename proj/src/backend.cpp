#include "toolrobust/backend.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>

namespace toolrobust {

namespace {

constexpr std::string_view kInferenceSystem =
    "You are an expert in using tools to handle real-time queries from users.\n"
    "First I will give you the task description, and your task start.\n"
    "At each step, your task is to give your thought to analyze the current state, decide the next step, with a "
    "function call to actually execute your step.\n"
    "After the call, you will get the call result, and you are now in a new state.\n"
    "Then you will analyze your status now, then decide what to do next...\n"
    "After many (Thought-call) pairs, you finally perform the task, then you can give your final answer.\n"
    "\n"
    "Desired format:\n"
    "Thought: <The thought>\n"
    "Action: <The tool you decide to use>\n"
    "Action Input: <The parameters for the tool>\n"
    "\n"
    "Remember:\n"
    "1. You should ALWAYS think about what to do, but all the thought is short, at most in 3 sentences.\n"
    "2. The action to take should be one of the given tools below.\n"
    "3. The \"Action Input\" needs to provide a dict similar to {parameter_1: value_1, parameter_2: value_2} to call "
    "action.\n"
    "4. Always use the \"finish\" tool upon task completion. The final answer should be comprehensive enough for the "
    "user. If the task is unmanageable, use the \"finish\" tool and respond with \"I cannot handle the task.\"\n"
    "\n"
    "Task description: You should use tools to help handle the real time user queries. Specifically, you have access "
    "of the following tools:\n"
    "{Tool Document}\n"
    "\n"
    "Let's Begin!";

constexpr std::string_view kInferenceUser = "{Query}\nBegin!";

constexpr std::string_view kExpansionSystem =
    "As an expert, your assignment is to utilize the comprehensive documentation of various tools to develop a series "
    "of problem scenarios that these tools can resolve. Ideally, each scenario should necessitate the sequential use "
    "of multiple tools for its resolution.\n"
    "\n"
    "Remember:\n"
    "1. The tools employed to address a problem should be a subset of the tools detailed in the provided "
    "documentation; ideally, each problem should require the use of more than one tool.\n"
    "2. The parameter values needed by each tool can either be directly extracted from the query or obtained by "
    "invoking the specified other tool.\n"
    "3. The problem scenario should be expressed in a way that is understandable to humans, while also showcasing the "
    "diverse functions of the provided tools and their interrelationships.\n"
    "\n"
    "Here is the documentation of various tools: {Tool Document}";

constexpr std::string_view kExpansionUser = "Please generate {Count} diverse queries according to the documentation.\n\nExamples:\n{Examples}";

constexpr std::string_view kTrajectorySystem =
    "You are an expert in using tools to handle real-time queries from users.\n"
    "At each step, your task is to give your thought to analyze the current state, decide the next step, with a "
    "function call to actually execute your step.\n"
    "After the call, you will get the call result, and you are now in a new state.\n"
    "Then you will analyze your status now, then decide what to do next...\n"
    "After a series of these thought-action pairs, you will complete the task and provide the final answer.\n"
    "\n"
    "Remember:\n"
    "1. You must ALWAYS select a specific function to execute your idea at each step.\n"
    "2. Before calling any function, you should ALWAYS give your thought, but limit it to a maximum of three "
    "sentences.\n"
    "3. ALWAYS use the \"finish\" tool upon task completion. The final answer should be comprehensive enough for the "
    "user. If the task is unmanageable, use the \"finish\" tool and respond with \"I cannot handle the task\".\n"
    "\n"
    "Let's begin!";

const std::vector<Tool>& meta_tools() {
    static const std::vector<Tool> tools = {
        Tool{std::string(kAskUserTool),
             "Ask the user for information that is required to continue and cannot be obtained with the other tools.",
             {Parameter{"question", "The question to put to the user.", ValueType::String, true, std::nullopt}}},
        Tool{std::string(kFinishTool),
             "Finish the task and give the final answer to the user.",
             {Parameter{"final_answer", "The final answer, or \"I cannot handle the task.\" if the task cannot be done.",
                        ValueType::String, true, std::nullopt}}},
    };
    return tools;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string type_label(const Parameter& p) {
    if (p.value_type != ValueType::Enum || !p.enum_values) return std::string(to_string(p.value_type));
    std::string out = "enum:";
    for (std::size_t i = 0; i < p.enum_values->size(); ++i) out += (i ? "|" : " ") + (*p.enum_values)[i];
    return out;
}

}  // namespace

std::string_view to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

json to_json(const ChatMessage& m) { return {{"role", std::string(to_string(m.role))}, {"content", m.content}}; }

std::vector<std::string> validate_config(const BackendConfig& config) {
    std::vector<std::string> out;
    if (!(config.timeout_seconds > 0)) out.emplace_back("timeout must be positive");
    if (config.concurrency_limit < 1) out.emplace_back("concurrency limit must be at least 1");
    if (config.max_retries < 0) out.emplace_back("max retries must be non-negative");
    if (config.kind == BackendKind::Http) {
        if (config.endpoint.empty()) out.emplace_back("http backend needs an endpoint");
        if (config.model_name.empty()) out.emplace_back("http backend needs a model name");
    }
    if (config.kind == BackendKind::Scripted && config.script_path.empty())
        out.emplace_back("scripted backend needs a script file");
    return out;
}

std::string render_tool(const Tool& tool) {
    std::string out = "Tool: " + tool.name + "\nDescription: " + tool.description + "\nParameters:";
    if (tool.parameters.empty()) return out + " none";
    for (const Parameter& p : tool.parameters) {
        out += "\n- " + p.name + " (" + type_label(p) + ", " + (p.required ? "Required" : "Optional") +
               "): " + p.description;
    }
    return out;
}

std::string render_tool_document(const std::vector<Tool>& tools) {
    std::string out;
    for (const Tool& t : tools) out += render_tool(t) + "\n\n";
    for (const Tool& t : meta_tools()) out += render_tool(t) + "\n\n";
    out.resize(out.size() - 2);
    return out;
}

std::string render_action(const ModelAction& action) {
    std::string out;
    if (action.thought) out += "Thought: " + *action.thought + "\n";
    out += "Action: " + action.tool_name + "\n";
    out += "Action Input: " + json(action.arguments).dump();
    return out;
}

std::vector<ChatMessage> build_prompt(const std::vector<Tool>& tools, std::string_view query,
                                      const std::vector<Turn>& prior_turns) {
    std::vector<ChatMessage> out;
    out.push_back({Role::System, replace_all(std::string(kInferenceSystem), "{Tool Document}", render_tool_document(tools))});
    out.push_back({Role::User, replace_all(std::string(kInferenceUser), "{Query}", query)});
    for (const Turn& t : prior_turns) {
        out.push_back({Role::Assistant, render_action(t.action)});
        out.push_back({Role::User, "Observation: " + t.observation});
    }
    return out;
}

std::vector<ChatMessage> build_prompt(const PerturbedCase& c) { return build_prompt(c.tools, c.query, c.prior_turns); }

std::vector<ChatMessage> build_query_expansion_prompt(const std::vector<Tool>& tools,
                                                      const std::vector<std::string>& examples, int query_count) {
    std::string rendered_examples;
    for (std::size_t i = 0; i < examples.size(); ++i)
        rendered_examples += (i ? "\n" : "") + std::to_string(i + 1) + ". " + examples[i];
    std::string user = replace_all(std::string(kExpansionUser), "{Count}", std::to_string(query_count));
    user = replace_all(std::move(user), "{Examples}", rendered_examples);
    return {{Role::System, replace_all(std::string(kExpansionSystem), "{Tool Document}", render_tool_document(tools))},
            {Role::User, std::move(user)}};
}

std::vector<ChatMessage> build_trajectory_prompt(std::string_view query) {
    return {{Role::System, std::string(kTrajectorySystem)},
            {Role::User, replace_all(std::string(kInferenceUser), "{Query}", query)}};
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path, std::string("malformed script file: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError(path, "script file must be a JSON object");
    std::map<std::string, std::string> answers;
    for (const auto& [id, text] : doc.items()) {
        if (!text.is_string()) throw ParseError(path + ": " + id, "expected a string");
        answers.emplace(id, text.get<std::string>());
    }
    return ScriptedBackend(std::move(answers));
}

std::string ScriptedBackend::complete(const std::string& case_id, const std::vector<ChatMessage>&) {
    auto it = answers_.find(case_id);
    if (it == answers_.end()) throw FixtureError(case_id, "no scripted answer");
    return it->second;
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url)) throw std::invalid_argument("bad endpoint URL '" + config_.endpoint + "'");
    base_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
}

json HttpBackend::request_body(const std::vector<ChatMessage>& messages) const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back(to_json(m));
    return {{"model", config_.model_name}, {"messages", std::move(msgs)}, {"temperature", config_.temperature}};
}

std::string HttpBackend::complete(const std::string& case_id, const std::vector<ChatMessage>& messages) {
    const std::string body = request_body(messages).dump();
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config_.timeout_seconds));
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(config_.retry_base_delay_ms) << (attempt - 1)));
        }
        httplib::Client client(base_);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            try {
                json reply = json::parse(res->body);
                const json& content = reply.at("choices").at(0).at("message").at("content");
                return content.is_string() ? content.get<std::string>() : std::string();
            } catch (const json::exception& e) {
                throw BackendError(case_id, std::string("malformed completion response: ") + e.what());
            }
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status != 429 && res->status < 500) break;
    }
    throw BackendError(case_id, last_error);
}

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config) {
    if (auto problems = validate_config(config); !problems.empty()) throw std::invalid_argument(problems.front());
    if (config.kind == BackendKind::Scripted)
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(config.script_path));
    return std::make_unique<HttpBackend>(config);
}

std::vector<BatchResult> run_batch(const std::vector<PerturbedCase>& cases, CompletionBackend& backend,
                                   int concurrency_limit, const std::function<void(const BatchResult&)>& on_result) {
    std::vector<BatchResult> results(cases.size());
    std::atomic<std::size_t> next{0};
    std::mutex sink;

    auto worker = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            BatchResult r;
            r.case_id = cases[i].id;
            try {
                r.text = backend.complete(cases[i].id, build_prompt(cases[i]));
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            std::lock_guard lock(sink);
            results[i] = r;
            if (on_result) on_result(results[i]);
        }
    };

    const auto workers = static_cast<std::size_t>(std::max(1, concurrency_limit));
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < std::min(workers, cases.size()); ++w) pool.emplace_back(worker);
    worker();
    pool.clear();  // join before results leave this frame
    return results;
}

}  // namespace toolrobust
