#include "toolrobust/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

#include "toolrobust/eval.hpp"

namespace toolrobust {

namespace {

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Replaces whole identifier tokens in one pass, so swapped names do not chain.
std::string replace_identifiers(std::string_view text, const std::map<std::string, std::string>& renames) {
    if (renames.empty()) return std::string(text);
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_ident_char(text[i])) {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_ident_char(text[j])) ++j;
        std::string token(text.substr(i, j - i));
        auto it = renames.find(token);
        out += it == renames.end() ? token : it->second;
        i = j;
    }
    return out;
}

std::map<std::string, std::string> renames_for(const NameMapping& m, const std::string* tool) {
    std::map<std::string, std::string> out = m.tool_renames;
    if (tool != nullptr) {
        for (const auto& [key, to] : m.param_renames)
            if (key.first == *tool) out.emplace(key.second, to);
    }
    return out;
}

}  // namespace

AugmentationPlan AugmentationPlan::defaults() {
    return {{{NoiseLevel::Slight, 3000}, {NoiseLevel::Medium, 3000}, {NoiseLevel::Heavy, 3000}, {NoiseLevel::Union, 1500}}};
}

AugmentationPlan AugmentationPlan::scaled_to(std::size_t available) const {
    std::size_t largest = 0;
    for (const auto& [level, n] : counts)
        if (level != NoiseLevel::Clean) largest = std::max(largest, n);
    if (largest <= available) return *this;
    AugmentationPlan out;
    for (const auto& [level, n] : counts) {
        if (level == NoiseLevel::Clean) continue;
        out.counts[level] = n * available / largest;
    }
    return out;
}

std::size_t AugmentationPlan::count(NoiseLevel level) const {
    auto it = counts.find(level);
    return it == counts.end() ? 0 : it->second;
}

AugmentationPlan parse_plan(std::string_view text) {
    AugmentationPlan plan;
    std::string s(text);
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("plan entry '" + item + "' is not level=count");
        std::string name(trim(std::string_view(item).substr(0, eq)));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        auto level = level_from_string(name);
        if (!level || *level == NoiseLevel::Clean) throw std::invalid_argument("plan level '" + name + "' is not a noisy level");
        const std::string count(trim(std::string_view(item).substr(eq + 1)));
        std::size_t used = 0;
        const unsigned long n = std::stoul(count, &used);
        if (used != count.size()) throw std::invalid_argument("plan count '" + count + "' is not a number");
        plan.counts[*level] = n;
    }
    return plan;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    if (c.empty() && r.empty()) return 1.0;
    if (c.empty() || r.empty()) return 0.0;
    const auto lcs = static_cast<double>(lcs_length(c, r));
    if (lcs == 0.0) return 0.0;
    const double precision = lcs / static_cast<double>(c.size());
    const double recall = lcs / static_cast<double>(r.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<std::string> dedup_queries(const std::vector<std::string>& candidates, const std::vector<std::string>& pool,
                                       double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("dedup threshold must be in (0, 1]");
    std::vector<std::string> seen = pool;
    std::vector<std::string> kept;
    for (const auto& cand : candidates) {
        const bool duplicate = std::any_of(seen.begin(), seen.end(), [&](const std::string& other) {
            return rouge_l(cand, other) > threshold;
        });
        if (duplicate) continue;
        kept.push_back(cand);
        seen.push_back(cand);
    }
    return kept;
}

std::vector<std::string> parse_generated_queries(std::string_view text) {
    static const std::regex prefix(R"(^\s*(?:\d+\s*[.)]|[-*•])\s*)");
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        line = std::regex_replace(line, prefix, "", std::regex_constants::format_first_only);
        auto t = trim(line);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

Trajectory rewrite_trajectory(const Trajectory& traj, const TestCase& source, const PerturbedCase& perturbed) {
    if (traj.source_case != source.id || perturbed.base != source.id)
        throw std::invalid_argument("trajectory '" + traj.id + "' does not belong to case '" + perturbed.base + "'");
    const NameMapping& m = perturbed.mapping;
    Trajectory out = traj;
    for (std::size_t i = 0; i < traj.turns.size(); ++i) {
        const ModelAction& a = traj.turns[i].action;
        Turn& t = out.turns[i];
        if (is_meta_tool(a.tool_name)) {
            const auto renames = renames_for(m, nullptr);
            if (a.thought) t.action.thought = replace_identifiers(*a.thought, renames);
            t.observation = replace_identifiers(traj.turns[i].observation, renames);
            continue;
        }
        const Tool* tool = source.find_tool(a.tool_name);
        if (tool == nullptr) throw RewriteError(traj.id, i, "tool '" + a.tool_name + "' is not in the source case");
        for (const auto& [key, value] : a.arguments)
            if (tool->find_parameter(key) == nullptr)
                throw RewriteError(traj.id, i, "parameter '" + key + "' is not a parameter of '" + a.tool_name + "'");
        const auto renames = renames_for(m, &a.tool_name);
        t.action = remap_action(a, m);
        if (a.thought) t.action.thought = replace_identifiers(*a.thought, renames);
        t.observation = replace_identifiers(traj.turns[i].observation, renames);
    }
    out.final_answer = replace_identifiers(traj.final_answer, renames_for(m, nullptr));
    return out;
}

std::map<NoiseLevel, std::vector<Trajectory>> sample_plan(const std::vector<Trajectory>& trajectories,
                                                          const AugmentationPlan& plan, std::uint64_t seed) {
    const AugmentationPlan scaled = plan.scaled_to(trajectories.size());
    std::map<NoiseLevel, std::vector<Trajectory>> out;
    out[NoiseLevel::Clean] = trajectories;
    for (NoiseLevel level : kAllLevels) {
        if (level == NoiseLevel::Clean) continue;
        Rng rng(SeedHasher(seed).add("sample").add(to_string(level)).finish());
        auto& bucket = out[level];
        for (std::size_t i : rng.sample_indices(trajectories.size(), scaled.count(level))) bucket.push_back(trajectories[i]);
    }
    return out;
}

AugmentResult augment_trajectories(const std::vector<Trajectory>& trajectories, const std::vector<TestCase>& cases,
                                   const AugmentationPlan& plan, std::uint64_t seed) {
    std::map<std::string, const TestCase*> by_id;
    for (const auto& c : cases) by_id[c.id] = &c;

    AugmentResult result;
    for (auto& [level, sampled] : sample_plan(trajectories, plan, seed)) {
        for (const Trajectory& t : sampled) {
            auto src = by_id.find(t.source_case);
            if (src == by_id.end()) {
                result.errors.push_back("trajectory '" + t.id + "': unknown source case '" + t.source_case + "'");
                continue;
            }
            try {
                Rng rng(SeedHasher(seed).add("environment").add(t.id).add(to_string(level)).finish());
                std::optional<PerturbationTarget> target;
                if (level == NoiseLevel::Union) target = PerturbationTarget::Both;
                else if (level != NoiseLevel::Clean)
                    target = rng.coin() ? PerturbationTarget::ToolNames : PerturbationTarget::ParameterNames;
                PerturbedCase env = perturb_case(*src->second, level, target, level == NoiseLevel::Clean ? 0 : rng.next());
                Trajectory rewritten = rewrite_trajectory(t, *src->second, env);
                result.trajectories.push_back({level, std::move(rewritten), std::move(env)});
                ++result.counts[level];
            } catch (const std::exception& e) {
                std::string msg = e.what();
                if (msg.find(t.id) == std::string::npos) msg = "trajectory '" + t.id + "': " + msg;
                result.errors.push_back(std::move(msg));
            }
        }
    }
    return result;
}

std::vector<TrainingRecord> export_records(const std::vector<AugmentedTrajectory>& trajectories) {
    std::vector<TrainingRecord> out;
    for (const auto& aug : trajectories) {
        const auto& turns = aug.trajectory.turns;
        for (std::size_t k = 0; k < turns.size(); ++k) {
            std::vector<Turn> context(turns.begin(), turns.begin() + static_cast<std::ptrdiff_t>(k));
            TrainingRecord r;
            r.messages = build_prompt(aug.environment.tools, aug.trajectory.query, context);
            r.target = render_action(turns[k].action);
            r.level = aug.level;
            r.trajectory_id = aug.trajectory.id;
            r.turn = k;
            out.push_back(std::move(r));
        }
    }
    return out;
}

json to_json(const Trajectory& t) {
    json turns = json::array();
    for (const auto& turn : t.turns) turns.push_back(to_json(turn));
    return {{"id", t.id},
            {"source_case", t.source_case},
            {"query", t.query},
            {"turns", std::move(turns)},
            {"final_answer", t.final_answer}};
}

Trajectory trajectory_from_json(const json& j, const std::string& path) {
    auto str = [&](std::string_view key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw ParseError(path + "." + std::string(key), "expected a string");
        return it->get<std::string>();
    };
    Trajectory t;
    t.id = str("id");
    t.source_case = str("source_case");
    t.query = str("query");
    t.final_answer = j.contains("final_answer") ? str("final_answer") : std::string();
    auto turns = j.find("turns");
    if (turns == j.end() || !turns->is_array()) throw ParseError(path + ".turns", "expected an array");
    if (turns->size() > kMaxTrajectoryTurns)
        throw ParseError(path + ".turns", "more than " + std::to_string(kMaxTrajectoryTurns) + " turns");
    for (std::size_t i = 0; i < turns->size(); ++i)
        t.turns.push_back(turn_from_json((*turns)[i], path + ".turns[" + std::to_string(i) + "]"));
    return t;
}

std::vector<Trajectory> parse_trajectories(std::string_view jsonl) {
    std::vector<Trajectory> out;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw ParseError("line " + std::to_string(lineno), "malformed trajectory");
        }
        out.push_back(trajectory_from_json(j, "line " + std::to_string(lineno)));
    }
    return out;
}

json to_json(const TrainingRecord& r) {
    json msgs = json::array();
    for (const auto& m : r.messages) msgs.push_back(to_json(m));
    return {{"messages", std::move(msgs)},
            {"target", r.target},
            {"level", std::string(to_string(r.level))},
            {"trajectory", r.trajectory_id},
            {"turn", r.turn}};
}

}  // namespace toolrobust
