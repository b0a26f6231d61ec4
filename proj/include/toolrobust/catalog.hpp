#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace toolrobust {

using json = nlohmann::json;

enum class ValueType { String, Integer, Number, Boolean, Enum };

std::string_view to_string(ValueType t);
std::optional<ValueType> value_type_from_string(std::string_view s);

struct Parameter {
    std::string name;
    std::string description;
    ValueType value_type = ValueType::String;
    bool required = false;
    std::optional<std::vector<std::string>> enum_values;

    bool operator==(const Parameter&) const = default;
};

struct Tool {
    std::string name;
    std::string description;
    std::vector<Parameter> parameters;

    const Parameter* find_parameter(std::string_view param) const;
    bool operator==(const Tool&) const = default;
};

struct Scenario {
    std::string id;
    std::string label;

    bool operator==(const Scenario&) const = default;
};

// The labeled invocation a case expects. `contents` carries one entry per
// element of `parameters`.
struct GoldCall {
    std::string tool_name;
    std::set<std::string> parameters;
    std::map<std::string, std::string> contents;

    bool operator==(const GoldCall&) const = default;
};

// A single tool call, either parsed from model output or taken from a
// labeled trajectory.
struct ModelAction {
    std::optional<std::string> thought;
    std::string tool_name;
    std::map<std::string, std::string> arguments;
    std::string raw;

    bool operator==(const ModelAction&) const = default;
};

struct Turn {
    ModelAction action;
    std::string observation;

    bool operator==(const Turn&) const = default;
};

struct TestCase {
    std::string id;
    std::string scenario;
    std::string query;
    std::vector<Tool> tools;
    GoldCall gold;
    std::vector<Turn> prior_turns;

    const Tool* find_tool(std::string_view name) const;
    bool operator==(const TestCase&) const = default;
};

struct Catalog {
    std::vector<Scenario> scenarios;  // optional registry; empty means unrestricted
    std::vector<TestCase> cases;

    bool operator==(const Catalog&) const = default;
};

struct Violation {
    std::string field;  // e.g. "tools[1].parameters[0].name"
    std::string rule;

    bool operator==(const Violation&) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string case_id, std::vector<Violation> violations);
    const std::string& case_id() const noexcept { return case_id_; }
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::string case_id_;
    std::vector<Violation> violations_;
};

// Reserved tools every environment offers next to the case's own tools.
inline constexpr std::string_view kFinishTool = "finish";
inline constexpr std::string_view kAskUserTool = "ask_to_user";
bool is_meta_tool(std::string_view name);

bool is_printable_ascii(std::string_view s);

std::vector<Violation> validate_case(const TestCase& c);

// Parses a catalog document. Syntax problems raise ParseError carrying the
// line (for malformed text) or the field path; invariant failures raise
// ValidationError naming the case.
Catalog parse_catalog(std::string_view document);
std::vector<TestCase> parse_cases(std::string_view document);

// Canonical form: sorted keys, two-space indent, trailing newline.
std::string serialize_catalog(const Catalog& catalog);
std::string canonical_dump(const json& j);

// JSON mapping, shared by the environment, transcript and trajectory files.
json to_json(const Parameter& p);
json to_json(const Tool& t);
json to_json(const GoldCall& g);
json to_json(const ModelAction& a);
json to_json(const Turn& t);
json to_json(const TestCase& c);

Parameter parameter_from_json(const json& j, const std::string& path);
Tool tool_from_json(const json& j, const std::string& path);
GoldCall gold_from_json(const json& j, const std::string& path);
ModelAction action_from_json(const json& j, const std::string& path);
Turn turn_from_json(const json& j, const std::string& path);
TestCase case_from_json(const json& j, const std::string& path);

// Reads the whole file; throws std::runtime_error on I/O failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace toolrobust
