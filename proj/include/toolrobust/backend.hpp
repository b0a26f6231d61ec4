#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "toolrobust/catalog.hpp"
#include "toolrobust/noise.hpp"

namespace toolrobust {

enum class Role { System, User, Assistant };
std::string_view to_string(Role r);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

json to_json(const ChatMessage& m);

enum class BackendKind { Http, Scripted };

struct BackendConfig {
    BackendKind kind = BackendKind::Scripted;
    std::string endpoint;  // http only, e.g. http://127.0.0.1:8000/v1/chat/completions
    std::string model_name;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    int concurrency_limit = 1;
    double temperature = 0.0;
    std::string api_key_env = "OPENAI_API_KEY";
    int retry_base_delay_ms = 500;
    std::string script_path;  // scripted only
};

// Empty when the configuration is usable.
std::vector<std::string> validate_config(const BackendConfig& config);

class BackendError : public std::runtime_error {
public:
    BackendError(std::string case_id, const std::string& what)
        : std::runtime_error("case '" + case_id + "': " + what), case_id_(std::move(case_id)) {}
    const std::string& case_id() const noexcept { return case_id_; }

private:
    std::string case_id_;
};

class FixtureError : public BackendError {
public:
    using BackendError::BackendError;
};

// --- prompts ---------------------------------------------------------------

std::string render_tool(const Tool& tool);
// Case tools followed by the reserved finish / ask_to_user tools.
std::string render_tool_document(const std::vector<Tool>& tools);
// Thought / Action / Action Input text for one call.
std::string render_action(const ModelAction& action);

std::vector<ChatMessage> build_prompt(const std::vector<Tool>& tools, std::string_view query,
                                      const std::vector<Turn>& prior_turns);
std::vector<ChatMessage> build_prompt(const PerturbedCase& c);

std::vector<ChatMessage> build_query_expansion_prompt(const std::vector<Tool>& tools,
                                                      const std::vector<std::string>& examples, int query_count);
std::vector<ChatMessage> build_trajectory_prompt(std::string_view query);

// --- completion sources ----------------------------------------------------

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    // Thread-safe. Throws BackendError on failure.
    virtual std::string complete(const std::string& case_id, const std::vector<ChatMessage>& messages) = 0;
};

class ScriptedBackend : public CompletionBackend {
public:
    explicit ScriptedBackend(std::map<std::string, std::string> answers) : answers_(std::move(answers)) {}
    // File holds a JSON object mapping case id to output text.
    static ScriptedBackend from_file(const std::string& path);

    std::string complete(const std::string& case_id, const std::vector<ChatMessage>& messages) override;

private:
    std::map<std::string, std::string> answers_;
};

// Chat-completion client: POSTs {model, messages, temperature} with a bearer
// token taken from the configured environment variable, retrying with
// exponential backoff on transport errors, 429 and 5xx.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(BackendConfig config);

    std::string complete(const std::string& case_id, const std::vector<ChatMessage>& messages) override;

    json request_body(const std::vector<ChatMessage>& messages) const;

private:
    BackendConfig config_;
    std::string base_;  // scheme://host:port
    std::string path_;
    std::string api_key_;
};

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config);

struct BatchResult {
    std::string case_id;
    std::optional<std::string> text;
    std::optional<std::string> error;
};

// Runs every case with at most `concurrency_limit` requests in flight. Results
// come back in input order; failures are recorded per case. `on_result`, if
// set, is called (serialized) as each case finishes.
std::vector<BatchResult> run_batch(const std::vector<PerturbedCase>& cases, CompletionBackend& backend,
                                   int concurrency_limit,
                                   const std::function<void(const BatchResult&)>& on_result = {});

}  // namespace toolrobust
