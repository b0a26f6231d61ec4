#include "toolrobust/eval.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace toolrobust {

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

void append_utf8(std::string& out, unsigned cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

// Recursive-descent reader for dict literals written by models.
class DictReader {
public:
    explicit DictReader(std::string_view text) : s_(text) {}

    std::map<std::string, std::string> read_object() {
        skip_ws();
        expect('{');
        std::map<std::string, std::string> out;
        skip_ws();
        if (peek() == '}') {
            ++pos_;
            return out;
        }
        for (;;) {
            skip_ws();
            std::string key = read_key();
            skip_ws();
            if (peek() != ':' && peek() != '=') fail("expected ':' after key");
            ++pos_;
            skip_ws();
            out[key] = read_value();
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                skip_ws();
                if (peek() == '}') {  // trailing comma
                    ++pos_;
                    return out;
                }
                continue;
            }
            if (peek() == '}') {
                ++pos_;
                return out;
            }
            fail("expected ',' or '}'");
        }
    }

private:
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    bool at_end() const { return pos_ >= s_.size(); }

    [[noreturn]] void fail(const std::string& what) const {
        throw ReactParseError("Action Input: " + what + " at offset " + std::to_string(pos_));
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    std::string read_key() {
        if (peek() == '"' || peek() == '\'') return read_quoted();
        std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-' ||
                             s_[pos_] == '.'))
            ++pos_;
        if (start == pos_) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string read_quoted() {
        const char quote = s_[pos_++];
        std::string out;
        while (!at_end() && s_[pos_] != quote) {
            char c = s_[pos_++];
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (at_end()) fail("dangling escape");
            char e = s_[pos_++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case 'u': {
                    if (pos_ + 4 > s_.size()) fail("short \\u escape");
                    unsigned cp = std::stoul(std::string(s_.substr(pos_, 4)), nullptr, 16);
                    pos_ += 4;
                    if (cp >= 0xd800 && cp < 0xdc00 && s_.substr(pos_, 2) == "\\u" && pos_ + 6 <= s_.size()) {
                        unsigned lo = std::stoul(std::string(s_.substr(pos_ + 2, 4)), nullptr, 16);
                        if (lo >= 0xdc00 && lo < 0xe000) {
                            cp = 0x10000 + ((cp - 0xd800) << 10) + (lo - 0xdc00);
                            pos_ += 6;
                        }
                    }
                    append_utf8(out, cp);
                    break;
                }
                default: out.push_back(e);  // \" \' \\ \/ and unknown escapes keep the character
            }
        }
        if (at_end()) fail("unterminated string");
        ++pos_;
        return out;
    }

    // Balanced nested value, returned as its source text with whitespace squeezed.
    std::string read_nested() {
        std::size_t start = pos_;
        int depth = 0;
        while (!at_end()) {
            char c = s_[pos_];
            if (c == '"' || c == '\'') {
                read_quoted();
                continue;
            }
            if (c == '{' || c == '[') ++depth;
            if (c == '}' || c == ']') {
                if (--depth == 0) {
                    ++pos_;
                    std::string raw(s_.substr(start, pos_ - start));
                    try {
                        return json::parse(raw).dump();
                    } catch (const json::parse_error&) {
                        return raw;
                    }
                }
            }
            ++pos_;
        }
        fail("unterminated nested value");
    }

    std::string read_value() {
        const char c = peek();
        if (c == '"' || c == '\'') return read_quoted();
        if (c == '{' || c == '[') return read_nested();
        std::size_t start = pos_;
        while (!at_end() && s_[pos_] != ',' && s_[pos_] != '}') ++pos_;
        std::string token(trim(s_.substr(start, pos_ - start)));
        if (token.empty()) fail("expected a value");
        if (token == "True" || token == "true") return "true";
        if (token == "False" || token == "false") return "false";
        if (token == "None" || token == "null") return "";
        return token;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

std::string strip_name(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '`' || s.front() == '"' || s.front() == '\'' || s.front() == '*')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '`' || s.back() == '"' || s.back() == '\'' || s.back() == '*')) s.remove_suffix(1);
    return std::string(trim(s));
}

std::string scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump();
}

}  // namespace

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::ToolSelection: return "ts";
        case Stage::ParameterIdentification: return "pi";
        case Stage::ContentFilling: return "cf";
    }
    return "";
}

std::string_view stage_label(Stage s) {
    switch (s) {
        case Stage::ToolSelection: return "Tool Selection";
        case Stage::ParameterIdentification: return "Parameter Identification";
        case Stage::ContentFilling: return "Content Filling";
    }
    return "";
}

std::optional<Stage> stage_from_string(std::string_view s) {
    for (Stage st : kAllStages)
        if (to_string(st) == s) return st;
    return std::nullopt;
}

int StageScores::at(Stage s) const {
    switch (s) {
        case Stage::ToolSelection: return ts;
        case Stage::ParameterIdentification: return pi;
        case Stage::ContentFilling: return cf;
    }
    return 0;
}

std::string_view trim(std::string_view s) {
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (!s.empty() && ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && ws(s.back())) s.remove_suffix(1);
    return s;
}

std::map<std::string, std::string> parse_action_input(std::string_view text) {
    text = trim(text);
    if (text.empty() || text.front() != '{') throw ReactParseError("Action Input is not a dict");
    return DictReader(text).read_object();
}

ModelAction parse_react(std::string_view text) {
    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(start, end - start);
            if (!starts_with(trim(line), "```")) lines.push_back(line);
            start = end + 1;
        }
    }
    auto label = [](std::string_view line) { return trim(line); };

    std::optional<std::size_t> action_line;
    for (std::size_t i = lines.size(); i-- > 0;) {
        if (starts_with(label(lines[i]), "Action:")) {
            action_line = i;
            break;
        }
    }
    if (!action_line) throw ReactParseError("no Action line");

    ModelAction action;
    action.raw = std::string(text);
    action.tool_name = strip_name(label(lines[*action_line]).substr(7));
    if (action.tool_name.empty()) throw ReactParseError("empty Action");

    std::optional<std::size_t> input_line;
    for (std::size_t i = *action_line + 1; i < lines.size(); ++i) {
        if (starts_with(label(lines[i]), "Action Input:")) {
            input_line = i;
            break;
        }
    }
    if (!input_line) throw ReactParseError("no Action Input line");
    std::string input(label(lines[*input_line]).substr(13));
    for (std::size_t i = *input_line + 1; i < lines.size(); ++i) {
        const auto l = label(lines[i]);
        if (starts_with(l, "Observation:") || starts_with(l, "Thought:")) break;
        input += "\n";
        input += lines[i];
    }
    std::string_view body = trim(input);
    // Trailing prose after the closing brace is ignored by the reader.
    action.arguments = parse_action_input(body);

    for (std::size_t i = *action_line; i-- > 0;) {
        const auto l = label(lines[i]);
        if (starts_with(l, "Action Input:") || starts_with(l, "Observation:")) break;
        if (starts_with(l, "Thought:")) {
            std::string thought(trim(l.substr(8)));
            for (std::size_t k = i + 1; k < *action_line; ++k) {
                thought += "\n";
                thought += trim(lines[k]);
            }
            action.thought = std::string(trim(thought));
            break;
        }
    }
    return action;
}

int score_tool_selection(const ModelAction& action, const GoldCall& gold) {
    return action.tool_name == gold.tool_name ? 1 : 0;
}

int score_parameter_identification(int s_ts, const ModelAction& action, const GoldCall& gold) {
    if (s_ts == 0) return 0;
    if (action.arguments.size() != gold.parameters.size()) return 0;
    for (const auto& [key, value] : action.arguments)
        if (!gold.parameters.contains(key)) return 0;
    return 1;
}

int score_content_filling(int s_pi, const ModelAction& action, const GoldCall& gold) {
    if (s_pi == 0) return 0;
    for (const auto& name : gold.parameters) {
        auto a = action.arguments.find(name);
        auto g = gold.contents.find(name);
        if (a == action.arguments.end() || g == gold.contents.end()) return 0;
        if (trim(a->second) != trim(g->second)) return 0;
    }
    return 1;
}

StageScores score_action(const ModelAction& action, const GoldCall& gold) {
    StageScores s;
    s.ts = score_tool_selection(action, gold);
    s.pi = score_parameter_identification(s.ts, action, gold);
    s.cf = score_content_filling(s.pi, action, gold);
    return s;
}

bool detect_hallucination(const ModelAction& action, const std::vector<Tool>& tools) {
    if (is_meta_tool(action.tool_name)) return false;
    return std::none_of(tools.begin(), tools.end(), [&](const Tool& t) { return t.name == action.tool_name; });
}

bool detect_noise_correction(const ModelAction& action, const std::vector<Tool>& tools, const NameMapping& mapping) {
    if (!detect_hallucination(action, tools)) return false;
    auto it = mapping.tool_renames.find(action.tool_name);
    return it != mapping.tool_renames.end() && it->second != action.tool_name;
}

bool detect_param_noise_correction(const ModelAction& action, const NameMapping& mapping) {
    for (const auto& [key, renamed] : mapping.param_renames) {
        if (mapping.tool_name(key.first) != action.tool_name) continue;
        if (action.arguments.contains(key.second) && !action.arguments.contains(renamed)) {
            // An exchange of parameter names keeps the original name valid.
            bool still_valid = std::any_of(mapping.param_renames.begin(), mapping.param_renames.end(), [&](const auto& e) {
                return e.first.first == key.first && e.second == key.second;
            });
            if (!still_valid) return true;
        }
    }
    return false;
}

json to_json(const TranscriptEntry& e) {
    json j = {{"id", e.id}, {"output", e.output}};
    if (e.function_call) j["function_call"] = {{"name", e.function_call->name}, {"arguments", e.function_call->arguments}};
    if (e.error) j["error"] = *e.error;
    return j;
}

TranscriptEntry transcript_entry_from_json(const json& j) {
    TranscriptEntry e;
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) throw ParseError("id", "expected a string");
    e.id = j["id"].get<std::string>();
    if (auto it = j.find("output"); it != j.end() && it->is_string()) e.output = it->get<std::string>();
    if (auto it = j.find("function_call"); it != j.end() && it->is_object()) {
        FunctionCall call;
        if (!it->contains("name") || !(*it)["name"].is_string()) throw ParseError("function_call.name", "expected a string");
        call.name = (*it)["name"].get<std::string>();
        call.arguments = it->value("arguments", json::object());
        // Chat APIs deliver arguments as a JSON-encoded string.
        if (call.arguments.is_string()) {
            try {
                call.arguments = json::parse(call.arguments.get<std::string>());
            } catch (const json::parse_error&) {
                throw ParseError("function_call.arguments", "not a JSON object");
            }
        }
        e.function_call = std::move(call);
    }
    if (auto it = j.find("error"); it != j.end() && it->is_string()) e.error = it->get<std::string>();
    return e;
}

std::string serialize_transcript(const std::vector<TranscriptEntry>& entries) {
    std::string out;
    for (const auto& e : entries) out += to_json(e).dump() + "\n";
    return out;
}

std::vector<TranscriptEntry> parse_transcript(std::string_view text) {
    std::vector<TranscriptEntry> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(transcript_entry_from_json(json::parse(line)));
        } catch (const std::exception&) {
            continue;
        }
    }
    return out;
}

ModelAction action_from_function_call(const FunctionCall& call) {
    if (!call.arguments.is_object()) throw ReactParseError("function_call arguments are not an object");
    ModelAction a;
    a.tool_name = call.name;
    for (const auto& [k, v] : call.arguments.items()) a.arguments[k] = scalar_to_string(v);
    a.raw = json{{"name", call.name}, {"arguments", call.arguments}}.dump();
    return a;
}

EvalRecord unanswered_record(const PerturbedCase& perturbed, std::string error) {
    EvalRecord r;
    r.case_id = perturbed.id;
    r.base = perturbed.base;
    r.scenario = perturbed.scenario;
    r.level = perturbed.level;
    r.target = perturbed.target;
    r.parse_failed = true;
    r.error = std::move(error);
    return r;
}

namespace {

EvalRecord evaluate_action(const PerturbedCase& perturbed, ModelAction action) {
    EvalRecord r = unanswered_record(perturbed, "");
    r.parse_failed = false;
    r.scores = score_action(action, perturbed.gold);
    r.hallucinated = detect_hallucination(action, perturbed.tools);
    r.noise_corrected = detect_noise_correction(action, perturbed.tools, perturbed.mapping);
    r.param_noise_corrected = detect_param_noise_correction(action, perturbed.mapping);
    r.action = std::move(action);
    return r;
}

}  // namespace

EvalRecord evaluate_case(const PerturbedCase& perturbed, std::string_view output) {
    try {
        return evaluate_action(perturbed, parse_react(output));
    } catch (const ReactParseError& e) {
        return unanswered_record(perturbed, e.what());
    }
}

EvalRecord evaluate_entry(const PerturbedCase& perturbed, const TranscriptEntry& entry) {
    if (entry.error) return unanswered_record(perturbed, "backend: " + *entry.error);
    if (entry.function_call) {
        try {
            return evaluate_action(perturbed, action_from_function_call(*entry.function_call));
        } catch (const ReactParseError& e) {
            return unanswered_record(perturbed, e.what());
        }
    }
    return evaluate_case(perturbed, entry.output);
}

json to_json(const EvalRecord& r) {
    json j = {{"id", r.case_id},
              {"base", r.base},
              {"scenario", r.scenario},
              {"level", std::string(to_string(r.level))},
              {"target", r.target ? std::string(to_string(*r.target)) : std::string("none")},
              {"s_ts", r.scores.ts},
              {"s_pi", r.scores.pi},
              {"s_cf", r.scores.cf},
              {"hallucinated", r.hallucinated},
              {"noise_corrected", r.noise_corrected},
              {"param_noise_corrected", r.param_noise_corrected},
              {"parse_failed", r.parse_failed}};
    if (!r.error.empty()) j["error"] = r.error;
    if (r.action) j["action"] = {{"tool", r.action->tool_name}, {"arguments", json(r.action->arguments)}};
    return j;
}

}  // namespace toolrobust
