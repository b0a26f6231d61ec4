#include "toolrobust/noise.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <regex>

namespace toolrobust {

namespace {

constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
constexpr std::string_view kLower = "abcdefghijklmnopqrstuvwxyz";
constexpr std::string_view kContentAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr int kMaxDraws = 1000;

constexpr std::array<NoiseLevel, 3> kNoisyLevels = {NoiseLevel::Slight, NoiseLevel::Medium, NoiseLevel::Heavy};

char pick(Rng& rng, std::string_view alphabet) { return alphabet[rng.below(alphabet.size())]; }

std::size_t half_up(std::size_t n) { return (n + 1) / 2; }

std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (;;) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        bool fixed = false;
        for (std::size_t i = 0; i < n; ++i) fixed = fixed || perm[i] == i;
        if (!fixed) return perm;
    }
}

std::string single_slight_attempt(std::string_view name, Rng& rng) {
    const std::size_t len = name.size();
    const std::size_t k = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(std::max<std::size_t>(1, len / 3))));
    const auto positions = rng.sample_indices(len, k);
    std::string out;
    out.reserve(len + k);
    std::size_t next = 0;
    for (std::size_t i = 0; i < len; ++i) {
        if (next < positions.size() && positions[next] == i) {
            ++next;
            // An omission would empty a one-character name.
            const auto op = len == 1 ? (rng.coin() ? NoiseKind::Insertion : NoiseKind::Substitution)
                                     : static_cast<NoiseKind>(rng.below(3));
            switch (op) {
                case NoiseKind::Insertion:
                    out.push_back(pick(rng, kLetters));
                    out.push_back(name[i]);
                    break;
                case NoiseKind::Omission:
                    break;
                default: {
                    char c;
                    do {
                        c = pick(rng, kLetters);
                    } while (c == name[i]);
                    out.push_back(c);
                }
            }
        } else {
            out.push_back(name[i]);
        }
    }
    return out;
}

void apply_tool_method(NoiseLevel method, const std::vector<Tool>& tools, Rng& rng, NameMapping& m) {
    if (method == NoiseLevel::Heavy) {
        m.tool_renames = exchange_tool_names(tools, rng).tool_renames;
        return;
    }
    std::set<std::string> existing{std::string(kFinishTool), std::string(kAskUserTool)};
    for (const auto& t : tools) existing.insert(t.name);
    for (std::size_t i : rng.sample_indices(tools.size(), half_up(tools.size()))) {
        const std::string& name = tools[i].name;
        std::string renamed = method == NoiseLevel::Slight ? slight_perturb_name(name, rng, existing)
                                                           : reverse_or_nonsense(name, rng, kToolNonsense, existing);
        existing.insert(renamed);
        m.tool_renames[name] = std::move(renamed);
    }
}

void apply_param_method(NoiseLevel method, const std::vector<Tool>& tools, Rng& rng, NameMapping& m) {
    if (method == NoiseLevel::Heavy) {
        for (std::size_t i : rng.sample_indices(tools.size(), half_up(tools.size()))) {
            const Tool& tool = tools[i];
            ParamNoiseOutcome outcome = heavy_parameter_noise(tool, rng);
            for (auto& [from, to] : outcome.renames) m.param_renames[{tool.name, from}] = std::move(to);
            if (outcome.injected) m.injected_params.emplace(tool.name, std::move(*outcome.injected));
        }
        return;
    }
    for (const Tool& tool : tools) {
        const std::size_t count = tool.parameters.size();
        if (count == 0) continue;
        std::set<std::string> existing;
        for (const auto& p : tool.parameters) existing.insert(p.name);
        for (std::size_t i : rng.sample_indices(count, half_up(count))) {
            const std::string& name = tool.parameters[i].name;
            std::string renamed = method == NoiseLevel::Slight
                                      ? slight_perturb_name(name, rng, existing)
                                      : reverse_or_nonsense(name, rng, kParamNonsense, existing);
            existing.insert(renamed);
            m.param_renames[{tool.name, name}] = std::move(renamed);
        }
    }
}

std::string variant_suffix(NoiseLevel level, std::optional<PerturbationTarget> target) {
    if (level == NoiseLevel::Clean) return "";
    std::string out = "@" + std::string(to_string(level));
    if (target && *target != PerturbationTarget::Both) out += "/" + std::string(to_string(*target));
    return out;
}

}  // namespace

std::string_view to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::Insertion: return "insertion";
        case NoiseKind::Omission: return "omission";
        case NoiseKind::Substitution: return "substitution";
        case NoiseKind::Reversal: return "reversal";
        case NoiseKind::Nonsense: return "nonsense";
        case NoiseKind::Exchange: return "exchange";
        case NoiseKind::Addendum: return "addendum";
    }
    return "";
}

std::string_view to_string(NoiseLevel level) {
    switch (level) {
        case NoiseLevel::Clean: return "clean";
        case NoiseLevel::Slight: return "slight";
        case NoiseLevel::Medium: return "medium";
        case NoiseLevel::Heavy: return "heavy";
        case NoiseLevel::Union: return "union";
    }
    return "";
}

std::string_view to_string(PerturbationTarget target) {
    switch (target) {
        case PerturbationTarget::ToolNames: return "tool";
        case PerturbationTarget::ParameterNames: return "parameter";
        case PerturbationTarget::Both: return "both";
    }
    return "";
}

std::optional<NoiseLevel> level_from_string(std::string_view s) {
    for (NoiseLevel l : kAllLevels)
        if (to_string(l) == s) return l;
    return std::nullopt;
}

std::optional<PerturbationTarget> target_from_string(std::string_view s) {
    for (auto t : {PerturbationTarget::ToolNames, PerturbationTarget::ParameterNames, PerturbationTarget::Both})
        if (to_string(t) == s) return t;
    return std::nullopt;
}

std::string NameMapping::tool_name(const std::string& original) const {
    auto it = tool_renames.find(original);
    return it == tool_renames.end() ? original : it->second;
}

std::string NameMapping::param_name(const std::string& tool, const std::string& param) const {
    auto it = param_renames.find({tool, param});
    return it == param_renames.end() ? param : it->second;
}

std::string slight_perturb_name(std::string_view name, Rng& rng, const std::set<std::string>& existing) {
    if (name.empty()) throw NoiseError("slight_perturb_name: empty name");
    for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
        std::string out = single_slight_attempt(name, rng);
        if (out != name && !existing.contains(out)) return out;
    }
    throw NoiseError("slight_perturb_name: no unique perturbation of '" + std::string(name) + "'");
}

std::string nonsense_string(Rng& rng, NameBounds bounds, const std::set<std::string>& existing) {
    if (bounds.max_len == 0) throw NoiseError("nonsense_string: max_len must be positive");
    const auto lo = static_cast<std::int64_t>(std::min(std::max<std::size_t>(bounds.min_len, 1), bounds.max_len));
    const auto hi = static_cast<std::int64_t>(bounds.max_len);
    for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
        const auto len = static_cast<std::size_t>(rng.between(lo, hi));
        std::string out;
        for (std::size_t i = 0; i < len; ++i) out.push_back(pick(rng, kLower));
        if (!existing.contains(out)) return out;
    }
    throw NoiseError("nonsense_string: exhausted " + std::to_string(kMaxDraws) + " draws");
}

std::string reverse_or_nonsense(std::string_view name, Rng& rng, NameBounds bounds,
                                const std::set<std::string>& existing) {
    if (name.empty()) throw NoiseError("reverse_or_nonsense: empty name");
    if (rng.coin()) {
        std::string reversed(name.rbegin(), name.rend());
        if (reversed != name && !existing.contains(reversed)) return reversed;
    }
    std::set<std::string> taken = existing;
    taken.emplace(name);
    return nonsense_string(rng, bounds, taken);
}

NameMapping exchange_tool_names(const std::vector<Tool>& tools, Rng& rng) {
    if (tools.size() < 2) throw NoiseError("exchange needs at least two tools");
    NameMapping m;
    const auto perm = derangement(tools.size(), rng);
    for (std::size_t i = 0; i < tools.size(); ++i) m.tool_renames[tools[i].name] = tools[perm[i]].name;
    return m;
}

std::string addendum_description(std::string_view content) {
    return "A mandatory parameter. To use this tool you must set it to exactly '" + std::string(content) + "'.";
}

std::optional<std::string> extract_addendum_content(std::string_view description) {
    static const std::regex pattern(R"(^A mandatory parameter\. To use this tool you must set it to exactly '([^']*)'\.$)");
    std::match_results<std::string_view::const_iterator> match;
    if (!std::regex_match(description.begin(), description.end(), match, pattern)) return std::nullopt;
    return match[1].str();
}

InjectedParam inject_addendum_param(const Tool& tool, Rng& rng) {
    std::set<std::string> existing;
    for (const auto& p : tool.parameters) existing.insert(p.name);
    InjectedParam out;
    out.parameter.name = nonsense_string(rng, kParamNonsense, existing);
    const auto len = static_cast<std::size_t>(rng.between(1, kMaxAddendumContent));
    for (std::size_t i = 0; i < len; ++i) out.gold_content.push_back(pick(rng, kContentAlphabet));
    out.parameter.description = addendum_description(out.gold_content);
    out.parameter.value_type = ValueType::String;
    out.parameter.required = true;
    return out;
}

ParamNoiseOutcome heavy_parameter_noise(const Tool& tool, Rng& rng) {
    ParamNoiseOutcome out;
    if (tool.parameters.size() < 2 || rng.coin()) {
        out.injected = inject_addendum_param(tool, rng);
        return out;
    }
    const auto perm = derangement(tool.parameters.size(), rng);
    for (std::size_t i = 0; i < tool.parameters.size(); ++i)
        out.renames[tool.parameters[i].name] = tool.parameters[perm[i]].name;
    return out;
}

std::vector<Tool> apply_mapping(const std::vector<Tool>& tools, const NameMapping& mapping) {
    std::vector<Tool> out;
    out.reserve(tools.size());
    for (const Tool& t : tools) {
        Tool nt = t;
        nt.name = mapping.tool_name(t.name);
        for (Parameter& p : nt.parameters) p.name = mapping.param_name(t.name, p.name);
        if (auto it = mapping.injected_params.find(t.name); it != mapping.injected_params.end())
            nt.parameters.push_back(it->second.parameter);
        out.push_back(std::move(nt));
    }
    return out;
}

GoldCall remap_gold(const GoldCall& gold, const NameMapping& mapping) {
    GoldCall out;
    out.tool_name = mapping.tool_name(gold.tool_name);
    for (const auto& p : gold.parameters) out.parameters.insert(mapping.param_name(gold.tool_name, p));
    for (const auto& [p, content] : gold.contents) out.contents[mapping.param_name(gold.tool_name, p)] = content;
    if (auto it = mapping.injected_params.find(gold.tool_name); it != mapping.injected_params.end()) {
        out.parameters.insert(it->second.parameter.name);
        out.contents[it->second.parameter.name] = it->second.gold_content;
    }
    return out;
}

ModelAction remap_action(const ModelAction& action, const NameMapping& mapping) {
    if (is_meta_tool(action.tool_name)) return action;
    ModelAction out;
    out.thought = action.thought;
    out.tool_name = mapping.tool_name(action.tool_name);
    for (const auto& [k, v] : action.arguments) out.arguments[mapping.param_name(action.tool_name, k)] = v;
    if (auto it = mapping.injected_params.find(action.tool_name); it != mapping.injected_params.end())
        out.arguments[it->second.parameter.name] = it->second.gold_content;
    return out;
}

std::uint64_t case_seed(std::uint64_t run_seed, std::string_view case_id, std::optional<PerturbationTarget> target,
                        NoiseLevel level) {
    return SeedHasher(run_seed)
        .add(case_id)
        .add(target ? to_string(*target) : std::string_view("none"))
        .add(to_string(level))
        .finish();
}

PerturbedCase perturb_case(const TestCase& c, NoiseLevel level, std::optional<PerturbationTarget> target,
                           std::uint64_t seed) {
    const bool target_ok = [&] {
        switch (level) {
            case NoiseLevel::Clean: return !target.has_value();
            case NoiseLevel::Union: return target == PerturbationTarget::Both;
            default: return target == PerturbationTarget::ToolNames || target == PerturbationTarget::ParameterNames;
        }
    }();
    if (!target_ok) throw NoiseError("invalid perturbation target for level " + std::string(to_string(level)));

    PerturbedCase out;
    out.id = c.id + variant_suffix(level, target);
    out.base = c.id;
    out.scenario = c.scenario;
    out.query = c.query;
    out.level = level;
    out.target = target;
    out.seed = seed;

    Rng rng(seed);
    try {
        if (level == NoiseLevel::Union) {
            out.tool_method = kNoisyLevels[rng.below(kNoisyLevels.size())];
            out.param_method = kNoisyLevels[rng.below(kNoisyLevels.size())];
            apply_tool_method(*out.tool_method, c.tools, rng, out.mapping);
            apply_param_method(*out.param_method, c.tools, rng, out.mapping);
        } else if (target == PerturbationTarget::ToolNames) {
            out.tool_method = level;
            apply_tool_method(level, c.tools, rng, out.mapping);
        } else if (target == PerturbationTarget::ParameterNames) {
            out.param_method = level;
            apply_param_method(level, c.tools, rng, out.mapping);
        }
    } catch (const NoiseError& e) {
        throw NoiseError("case '" + c.id + "': " + e.what());
    }

    out.tools = apply_mapping(c.tools, out.mapping);
    out.gold = remap_gold(c.gold, out.mapping);
    for (const Turn& t : c.prior_turns) out.prior_turns.push_back({remap_action(t.action, out.mapping), t.observation});
    return out;
}

std::vector<PerturbedCase> build_environment(const std::vector<TestCase>& cases, NoiseLevel level,
                                             std::uint64_t seed) {
    std::vector<PerturbedCase> out;
    for (const TestCase& c : cases) {
        if (auto violations = validate_case(c); !violations.empty()) throw ValidationError(c.id, violations);
    }
    auto emit = [&](const TestCase& c, std::optional<PerturbationTarget> target) {
        out.push_back(perturb_case(c, level, target, case_seed(seed, c.id, target, level)));
    };
    for (const TestCase& c : cases) {
        switch (level) {
            case NoiseLevel::Clean: emit(c, std::nullopt); break;
            case NoiseLevel::Union: emit(c, PerturbationTarget::Both); break;
            default:
                emit(c, PerturbationTarget::ToolNames);
                emit(c, PerturbationTarget::ParameterNames);
        }
    }
    return out;
}

std::vector<Violation> verify_perturbation(const TestCase& original, const PerturbedCase& p) {
    std::vector<Violation> out;
    auto add = [&](std::string field, std::string rule) { out.push_back({std::move(field), std::move(rule)}); };
    const NameMapping& m = p.mapping;

    if (p.base != original.id) add("base", "does not name the source case");
    if (p.tools.size() != original.tools.size()) {
        add("tools", "tool count changed");
        return out;
    }
    for (const auto& [from, to] : m.tool_renames) {
        if (original.find_tool(from) == nullptr) add("mapping.tool_renames", "unknown tool '" + from + "'");
        if (from == to) add("mapping.tool_renames", "'" + from + "' maps to itself");
    }
    for (const auto& [key, to] : m.param_renames) {
        const Tool* t = original.find_tool(key.first);
        if (t == nullptr || t->find_parameter(key.second) == nullptr)
            add("mapping.param_renames", "unknown parameter '" + key.first + "." + key.second + "'");
        if (key.second == to) add("mapping.param_renames", "'" + key.second + "' maps to itself");
    }

    std::set<std::string> tool_names;
    for (std::size_t i = 0; i < p.tools.size(); ++i) {
        const Tool& o = original.tools[i];
        const Tool& t = p.tools[i];
        const std::string path = "tools[" + std::to_string(i) + "]";
        if (t.description != o.description) add(path + ".description", "differs from the original");
        if (t.name != m.tool_name(o.name)) add(path + ".name", "does not follow the mapping");
        if (!tool_names.insert(t.name).second) add(path + ".name", "duplicate perturbed tool name");

        auto inj = m.injected_params.find(o.name);
        const std::size_t expected = o.parameters.size() + (inj != m.injected_params.end() ? 1 : 0);
        if (t.parameters.size() != expected) {
            add(path + ".parameters", "unexpected parameter count");
            continue;
        }
        std::set<std::string> param_names;
        for (std::size_t j = 0; j < t.parameters.size(); ++j) {
            const Parameter& tp = t.parameters[j];
            const std::string pp = path + ".parameters[" + std::to_string(j) + "]";
            if (!param_names.insert(tp.name).second) add(pp + ".name", "duplicate perturbed parameter name");
            if (j < o.parameters.size()) {
                const Parameter& op = o.parameters[j];
                if (tp.description != op.description) add(pp + ".description", "differs from the original");
                if (tp.value_type != op.value_type || tp.required != op.required || tp.enum_values != op.enum_values)
                    add(pp, "attributes changed");
                if (tp.name != m.param_name(o.name, op.name)) add(pp + ".name", "does not follow the mapping");
            }
        }
        if (inj != m.injected_params.end()) {
            const InjectedParam& ip = inj->second;
            const Parameter& tp = t.parameters.back();
            if (!(tp == ip.parameter)) add(path, "injected parameter not appended");
            if (!ip.parameter.required) add(path, "injected parameter must be required");
            if (ip.parameter.name.empty() || ip.parameter.name.size() > kParamNonsense.max_len)
                add(path, "injected parameter name length out of range");
            if (ip.gold_content.empty() || ip.gold_content.size() > kMaxAddendumContent)
                add(path, "injected gold content length out of range");
            if (extract_addendum_content(ip.parameter.description) != ip.gold_content)
                add(path, "injected description does not state the gold content");
        }
    }
    if (!(p.gold == remap_gold(original.gold, m))) add("gold", "not remapped through the mapping");

    TestCase as_case{p.id, p.scenario, p.query, p.tools, p.gold, p.prior_turns};
    for (auto& v : validate_case(as_case)) out.push_back(std::move(v));
    return out;
}

json to_json(const NameMapping& m) {
    json tools = json::object();
    for (const auto& [from, to] : m.tool_renames) tools[from] = to;
    json params = json::object();
    for (const auto& [key, to] : m.param_renames) params[key.first][key.second] = to;
    json injected = json::object();
    for (const auto& [tool, ip] : m.injected_params)
        injected[tool] = {{"parameter", to_json(ip.parameter)}, {"gold_content", ip.gold_content}};
    return {{"tool_renames", std::move(tools)}, {"param_renames", std::move(params)}, {"injected_params", std::move(injected)}};
}

NameMapping mapping_from_json(const json& j, const std::string& path) {
    auto object_at = [&](std::string_view key) -> const json& {
        auto it = j.find(key);
        if (it == j.end() || !it->is_object()) throw ParseError(path + "." + std::string(key), "expected an object");
        return *it;
    };
    NameMapping m;
    for (const auto& [from, to] : object_at("tool_renames").items()) {
        if (!to.is_string()) throw ParseError(path + ".tool_renames." + from, "expected a string");
        m.tool_renames[from] = to.get<std::string>();
    }
    for (const auto& [tool, params] : object_at("param_renames").items()) {
        if (!params.is_object()) throw ParseError(path + ".param_renames." + tool, "expected an object");
        for (const auto& [from, to] : params.items()) {
            if (!to.is_string()) throw ParseError(path + ".param_renames." + tool + "." + from, "expected a string");
            m.param_renames[{tool, from}] = to.get<std::string>();
        }
    }
    for (const auto& [tool, entry] : object_at("injected_params").items()) {
        const std::string p = path + ".injected_params." + tool;
        if (!entry.is_object() || !entry.contains("parameter") || !entry.contains("gold_content") ||
            !entry["gold_content"].is_string())
            throw ParseError(p, "expected {parameter, gold_content}");
        m.injected_params[tool] = {parameter_from_json(entry["parameter"], p + ".parameter"),
                                   entry["gold_content"].get<std::string>()};
    }
    return m;
}

json to_json(const PerturbedCase& c) {
    json j = to_json(TestCase{c.id, c.scenario, c.query, c.tools, c.gold, c.prior_turns});
    j["base"] = c.base;
    j["level"] = std::string(to_string(c.level));
    j["target"] = c.target ? std::string(to_string(*c.target)) : std::string("none");
    j["seed"] = c.seed;
    j["mapping"] = to_json(c.mapping);
    if (c.tool_method) j["tool_method"] = std::string(to_string(*c.tool_method));
    if (c.param_method) j["param_method"] = std::string(to_string(*c.param_method));
    return j;
}

PerturbedCase perturbed_case_from_json(const json& j, const std::string& path) {
    TestCase base = case_from_json(j, path);
    PerturbedCase c;
    c.id = base.id;
    c.scenario = base.scenario;
    c.query = base.query;
    c.tools = std::move(base.tools);
    c.gold = std::move(base.gold);
    c.prior_turns = std::move(base.prior_turns);

    auto str = [&](std::string_view key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw ParseError(path + "." + std::string(key), "expected a string");
        return it->get<std::string>();
    };
    auto level_of = [&](std::string_view key) {
        auto l = level_from_string(str(key));
        if (!l) throw ParseError(path + "." + std::string(key), "unknown noise level");
        return *l;
    };
    c.base = str("base");
    c.level = level_of("level");
    const std::string target = str("target");
    if (target != "none") {
        c.target = target_from_string(target);
        if (!c.target) throw ParseError(path + ".target", "unknown target '" + target + "'");
    }
    auto seed = j.find("seed");
    if (seed == j.end() || !seed->is_number_unsigned()) throw ParseError(path + ".seed", "expected an unsigned integer");
    c.seed = seed->get<std::uint64_t>();
    auto mapping = j.find("mapping");
    if (mapping == j.end()) throw ParseError(path + ".mapping", "missing field");
    c.mapping = mapping_from_json(*mapping, path + ".mapping");
    if (j.contains("tool_method")) c.tool_method = level_of("tool_method");
    if (j.contains("param_method")) c.param_method = level_of("param_method");
    return c;
}

std::string serialize_environment(const Environment& env) {
    json cases = json::array();
    for (const auto& c : env.cases) cases.push_back(to_json(c));
    return canonical_dump({{"level", std::string(to_string(env.level))}, {"seed", env.seed}, {"cases", std::move(cases)}});
}

Environment parse_environment(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("", std::string("malformed environment document: ") + e.what());
    }
    Environment env;
    if (!doc.is_object() || !doc.contains("level") || !doc["level"].is_string())
        throw ParseError("level", "expected a string");
    auto level = level_from_string(doc["level"].get<std::string>());
    if (!level) throw ParseError("level", "unknown noise level");
    env.level = *level;
    if (!doc.contains("seed") || !doc["seed"].is_number_unsigned()) throw ParseError("seed", "expected an unsigned integer");
    env.seed = doc["seed"].get<std::uint64_t>();
    if (!doc.contains("cases") || !doc["cases"].is_array()) throw ParseError("cases", "expected an array");
    for (std::size_t i = 0; i < doc["cases"].size(); ++i)
        env.cases.push_back(perturbed_case_from_json(doc["cases"][i], "cases[" + std::to_string(i) + "]"));
    return env;
}

}  // namespace toolrobust
