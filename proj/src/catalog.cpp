#include "toolrobust/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace toolrobust {

namespace {

std::string join_path(const std::string& base, std::string_view key) {
    if (base.empty()) return std::string(key);
    return base + "." + std::string(key);
}

std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(join_path(path, key), "missing field");
    return *it;
}

std::string require_string(const json& obj, std::string_view key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_string()) throw ParseError(join_path(path, key), "expected a string");
    return v.get<std::string>();
}

const json& require_array(const json& obj, std::string_view key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_array()) throw ParseError(join_path(path, key), "expected an array");
    return v;
}

std::map<std::string, std::string> string_map(const json& v, const std::string& path) {
    if (!v.is_object()) throw ParseError(path, "expected an object");
    std::map<std::string, std::string> out;
    for (const auto& [k, val] : v.items()) {
        if (!val.is_string()) throw ParseError(join_path(path, k), "expected a string");
        out.emplace(k, val.get<std::string>());
    }
    return out;
}

std::size_t line_of(std::string_view doc, std::size_t byte) {
    byte = std::min(byte, doc.size());
    return 1 + static_cast<std::size_t>(std::count(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::string_view to_string(ValueType t) {
    switch (t) {
        case ValueType::String: return "string";
        case ValueType::Integer: return "integer";
        case ValueType::Number: return "number";
        case ValueType::Boolean: return "boolean";
        case ValueType::Enum: return "enum";
    }
    return "string";
}

std::optional<ValueType> value_type_from_string(std::string_view s) {
    if (s == "string") return ValueType::String;
    if (s == "integer") return ValueType::Integer;
    if (s == "number") return ValueType::Number;
    if (s == "boolean") return ValueType::Boolean;
    if (s == "enum") return ValueType::Enum;
    return std::nullopt;
}

const Parameter* Tool::find_parameter(std::string_view param) const {
    for (const auto& p : parameters)
        if (p.name == param) return &p;
    return nullptr;
}

const Tool* TestCase::find_tool(std::string_view name) const {
    for (const auto& t : tools)
        if (t.name == name) return &t;
    return nullptr;
}

bool is_meta_tool(std::string_view name) { return name == kFinishTool || name == kAskUserTool; }

bool is_printable_ascii(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char ch) {
        auto c = static_cast<unsigned char>(ch);
        return c >= 0x20 && c < 0x7f;
    });
}

ValidationError::ValidationError(std::string case_id, std::vector<Violation> violations)
    : std::runtime_error([&] {
          std::string msg = "case '" + case_id + "' is invalid";
          for (const auto& v : violations) msg += "; " + v.field + ": " + v.rule;
          return msg;
      }()),
      case_id_(std::move(case_id)),
      violations_(std::move(violations)) {}

std::vector<Violation> validate_case(const TestCase& c) {
    std::vector<Violation> out;
    auto add = [&](std::string field, std::string rule) { out.push_back({std::move(field), std::move(rule)}); };

    if (c.id.empty()) add("id", "must be non-empty");
    if (c.scenario.empty()) add("scenario", "must be non-empty");

    std::set<std::string> tool_names;
    for (std::size_t ti = 0; ti < c.tools.size(); ++ti) {
        const Tool& t = c.tools[ti];
        const std::string tp = index_path("tools", ti);
        if (t.name.empty() || !is_printable_ascii(t.name)) {
            add(tp + ".name", "must be non-empty printable ASCII");
        } else if (!tool_names.insert(t.name).second) {
            add(tp + ".name", "duplicate tool name '" + t.name + "'");
        }
        std::set<std::string> param_names;
        for (std::size_t pi = 0; pi < t.parameters.size(); ++pi) {
            const Parameter& p = t.parameters[pi];
            const std::string pp = index_path(tp + ".parameters", pi);
            if (p.name.empty() || !is_printable_ascii(p.name)) {
                add(pp + ".name", "must be non-empty printable ASCII");
            } else if (!param_names.insert(p.name).second) {
                add(pp + ".name", "duplicate parameter name '" + p.name + "'");
            }
            const bool has_values = p.enum_values.has_value() && !p.enum_values->empty();
            if ((p.value_type == ValueType::Enum) != has_values)
                add(pp + ".enum_values", "must be non-empty exactly when type is enum");
        }
    }

    const Tool* gold_tool = c.find_tool(c.gold.tool_name);
    if (gold_tool == nullptr) {
        add("gold.tool", "tool '" + c.gold.tool_name + "' is not among the case's tools");
    } else {
        for (const auto& name : c.gold.parameters)
            if (gold_tool->find_parameter(name) == nullptr)
                add("gold.parameters", "'" + name + "' is not a parameter of '" + gold_tool->name + "'");
        for (const auto& p : gold_tool->parameters)
            if (p.required && !c.gold.parameters.contains(p.name))
                add("gold.parameters", "required parameter '" + p.name + "' is missing");
    }

    for (const auto& name : c.gold.parameters)
        if (!c.gold.contents.contains(name)) add("gold.contents", "missing content for '" + name + "'");
    for (const auto& [name, value] : c.gold.contents)
        if (!c.gold.parameters.contains(name)) add("gold.contents", "'" + name + "' is not a gold parameter");

    for (std::size_t i = 0; i < c.prior_turns.size(); ++i)
        if (c.prior_turns[i].action.tool_name.empty())
            add(index_path("prior_turns", i) + ".tool", "must be non-empty");

    return out;
}

json to_json(const Parameter& p) {
    json j = {{"name", p.name},
              {"description", p.description},
              {"type", std::string(to_string(p.value_type))},
              {"required", p.required}};
    if (p.enum_values) j["enum_values"] = *p.enum_values;
    return j;
}

json to_json(const Tool& t) {
    json params = json::array();
    for (const auto& p : t.parameters) params.push_back(to_json(p));
    return {{"name", t.name}, {"description", t.description}, {"parameters", std::move(params)}};
}

json to_json(const GoldCall& g) {
    return {{"tool", g.tool_name},
            {"parameters", json(std::vector<std::string>(g.parameters.begin(), g.parameters.end()))},
            {"contents", json(g.contents)}};
}

json to_json(const ModelAction& a) {
    json j = {{"tool", a.tool_name}, {"arguments", json(a.arguments)}};
    if (a.thought) j["thought"] = *a.thought;
    if (!a.raw.empty()) j["raw"] = a.raw;
    return j;
}

json to_json(const Turn& t) {
    json j = to_json(t.action);
    j["observation"] = t.observation;
    return j;
}

json to_json(const TestCase& c) {
    json tools = json::array();
    for (const auto& t : c.tools) tools.push_back(to_json(t));
    json j = {{"id", c.id},
              {"scenario", c.scenario},
              {"query", c.query},
              {"tools", std::move(tools)},
              {"gold", to_json(c.gold)}};
    if (!c.prior_turns.empty()) {
        json turns = json::array();
        for (const auto& t : c.prior_turns) turns.push_back(to_json(t));
        j["prior_turns"] = std::move(turns);
    }
    return j;
}

Parameter parameter_from_json(const json& j, const std::string& path) {
    Parameter p;
    p.name = require_string(j, "name", path);
    p.description = require_string(j, "description", path);
    const std::string type = require_string(j, "type", path);
    auto vt = value_type_from_string(type);
    if (!vt) throw ParseError(join_path(path, "type"), "unknown type '" + type + "'");
    p.value_type = *vt;
    const json& req = require(j, "required", path);
    if (!req.is_boolean()) throw ParseError(join_path(path, "required"), "expected a boolean");
    p.required = req.get<bool>();
    if (auto it = j.find("enum_values"); it != j.end()) {
        if (!it->is_array()) throw ParseError(join_path(path, "enum_values"), "expected an array");
        std::vector<std::string> values;
        for (std::size_t i = 0; i < it->size(); ++i) {
            if (!(*it)[i].is_string())
                throw ParseError(index_path(join_path(path, "enum_values"), i), "expected a string");
            values.push_back((*it)[i].get<std::string>());
        }
        p.enum_values = std::move(values);
    }
    return p;
}

Tool tool_from_json(const json& j, const std::string& path) {
    Tool t;
    t.name = require_string(j, "name", path);
    t.description = require_string(j, "description", path);
    const json& params = require_array(j, "parameters", path);
    for (std::size_t i = 0; i < params.size(); ++i)
        t.parameters.push_back(parameter_from_json(params[i], index_path(join_path(path, "parameters"), i)));
    return t;
}

GoldCall gold_from_json(const json& j, const std::string& path) {
    GoldCall g;
    g.tool_name = require_string(j, "tool", path);
    const json& params = require_array(j, "parameters", path);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].is_string())
            throw ParseError(index_path(join_path(path, "parameters"), i), "expected a string");
        g.parameters.insert(params[i].get<std::string>());
    }
    g.contents = string_map(require(j, "contents", path), join_path(path, "contents"));
    return g;
}

ModelAction action_from_json(const json& j, const std::string& path) {
    ModelAction a;
    a.tool_name = require_string(j, "tool", path);
    a.arguments = string_map(require(j, "arguments", path), join_path(path, "arguments"));
    if (auto it = j.find("thought"); it != j.end()) {
        if (!it->is_string()) throw ParseError(join_path(path, "thought"), "expected a string");
        a.thought = it->get<std::string>();
    }
    if (auto it = j.find("raw"); it != j.end()) {
        if (!it->is_string()) throw ParseError(join_path(path, "raw"), "expected a string");
        a.raw = it->get<std::string>();
    }
    return a;
}

Turn turn_from_json(const json& j, const std::string& path) {
    Turn t;
    t.action = action_from_json(j, path);
    t.observation = require_string(j, "observation", path);
    return t;
}

TestCase case_from_json(const json& j, const std::string& path) {
    TestCase c;
    c.id = require_string(j, "id", path);
    c.scenario = require_string(j, "scenario", path);
    c.query = require_string(j, "query", path);
    const json& tools = require_array(j, "tools", path);
    for (std::size_t i = 0; i < tools.size(); ++i)
        c.tools.push_back(tool_from_json(tools[i], index_path(join_path(path, "tools"), i)));
    c.gold = gold_from_json(require(j, "gold", path), join_path(path, "gold"));
    if (auto it = j.find("prior_turns"); it != j.end()) {
        if (!it->is_array()) throw ParseError(join_path(path, "prior_turns"), "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i)
            c.prior_turns.push_back(turn_from_json((*it)[i], index_path(join_path(path, "prior_turns"), i)));
    }
    return c;
}

Catalog parse_catalog(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_of(document, e.byte == 0 ? 0 : e.byte - 1)),
                         "malformed document");
    }
    Catalog catalog;
    if (auto it = doc.find("scenarios"); doc.is_object() && it != doc.end()) {
        if (!it->is_array()) throw ParseError("scenarios", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string p = index_path("scenarios", i);
            catalog.scenarios.push_back({require_string((*it)[i], "id", p), require_string((*it)[i], "label", p)});
        }
    }
    const json& cases = require_array(doc, "cases", "");
    std::set<std::string> ids;
    std::set<std::string> scenario_ids;
    for (const auto& s : catalog.scenarios) {
        if (!scenario_ids.insert(s.id).second)
            throw ParseError("scenarios", "duplicate scenario id '" + s.id + "'");
    }
    for (std::size_t i = 0; i < cases.size(); ++i) {
        TestCase c = case_from_json(cases[i], index_path("cases", i));
        auto violations = validate_case(c);
        if (!catalog.scenarios.empty() && !scenario_ids.contains(c.scenario))
            violations.push_back({"scenario", "unknown scenario '" + c.scenario + "'"});
        if (!ids.insert(c.id).second) violations.push_back({"id", "duplicate case id"});
        if (!violations.empty()) throw ValidationError(c.id, std::move(violations));
        catalog.cases.push_back(std::move(c));
    }
    return catalog;
}

std::vector<TestCase> parse_cases(std::string_view document) { return parse_catalog(document).cases; }

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

std::string serialize_catalog(const Catalog& catalog) {
    json doc;
    json cases = json::array();
    for (const auto& c : catalog.cases) cases.push_back(to_json(c));
    doc["cases"] = std::move(cases);
    if (!catalog.scenarios.empty()) {
        json scenarios = json::array();
        for (const auto& s : catalog.scenarios) scenarios.push_back({{"id", s.id}, {"label", s.label}});
        doc["scenarios"] = std::move(scenarios);
    }
    return canonical_dump(doc);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace toolrobust
