// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "toolrobust/augment.hpp"
#include "toolrobust/cli.hpp"
#include "toolrobust/noise.hpp"
#include "toolrobust/stats.hpp"

using namespace toolrobust;
using namespace oracles;
using testsupport::CaseGen;
using testsupport::data_path;
using testsupport::is_palindrome;
using testsupport::levenshtein;
using testsupport::scratch_dir;

namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects violations; the first few are kept for the report line.
class Tally {
public:
    void fail(const std::string& what) {
        if (++failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok) fail(what);
    }
    std::size_t checks() const { return checks_; }
    Outcome outcome(const std::string& summary) const {
        if (failures_ == 0) return {true, summary};
        return {false, std::to_string(failures_) + " violation(s): " + notes_};
    }

private:
    std::size_t checks_ = 0;
    std::size_t failures_ = 0;
    std::string notes_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::size_t ceil_half(std::size_t n) { return (n + 1) / 2; }

std::map<std::string, std::string> snapshot(const std::string& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out[e.path().filename().string()] = read_file(e.path().string());
    return out;
}

RunConfig demo_config(const std::string& out, int concurrency = 1) {
    RunConfig c;
    c.catalog_path = data_path("demo/catalog.json");
    c.seed = 7;
    c.out_dir = out;
    c.backend.kind = BackendKind::Scripted;
    c.backend.script_path = data_path("demo/script.json");
    c.backend.concurrency_limit = concurrency;
    c.trajectories_path = data_path("demo/trajectories.jsonl");
    c.plan = parse_plan("slight=3,medium=3,heavy=3,union=1");
    return c;
}

std::vector<TestCase> random_catalog(std::uint64_t seed, std::size_t n) {
    CaseGen gen(seed);
    std::vector<TestCase> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(gen.make_case("r" + std::to_string(i), 2, 6));
    return out;
}

// 1. Case-count law.

Outcome case_count_law() {
    Tally t;
    for (std::size_t n : {1u, 2u, 7u, 33u, 105u}) {
        const auto cases = random_catalog(n, n);
        for (NoiseLevel level : kAllLevels) {
            const bool doubled = level == NoiseLevel::Slight || level == NoiseLevel::Medium || level == NoiseLevel::Heavy;
            const auto env = build_environment(cases, level, 42);
            std::set<std::string> ids;
            for (const auto& p : env) ids.insert(p.id);
            t.expect(env.size() == (doubled ? 2 * n : n) && ids.size() == env.size(),
                     "N=" + std::to_string(n) + " " + std::string(to_string(level)) + " gave " + std::to_string(env.size()));
        }
    }

    const std::string dir = scratch_dir("accept_count");
    Catalog cat;
    cat.cases = random_catalog(105, 105);
    write_file(dir + "/catalog.json", serialize_catalog(cat));
    RunConfig c = demo_config(dir + "/out");
    c.catalog_path = dir + "/catalog.json";
    std::ostringstream log;
    cmd_generate(c, log);
    const json counts = json::parse(read_file(dir + "/out/manifest_generate.json"))["counts"];
    t.expect(counts == json{{"clean", 105}, {"slight", 210}, {"medium", 210}, {"heavy", 210}, {"union", 105}},
             "N=105 manifest " + counts.dump());

    const auto start = std::chrono::steady_clock::now();
    cmd_generate(demo_config(scratch_dir("accept_count_demo")), log);
    const double elapsed = seconds_since(start);
    t.expect(elapsed < 5.0, "demo generate took " + fmt(elapsed) + " s");
    return t.outcome("N in {1,2,7,33,105} exact, 105 -> 210/210/210/105, demo generate " + fmt(elapsed, 3) + " s");
}

// 2. Noise invariants, checked from the outside against the source case.

bool lower_letters(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char ch) { return ch >= 'a' && ch <= 'z'; });
}

bool alnum_lower(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char ch) { return (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9'); });
}

std::string reversed(const std::string& s) { return {s.rbegin(), s.rend()}; }

void check_renamed(Tally& t, NoiseLevel method, const std::string& from, const std::string& to, NameBounds bounds,
                   const std::string& where) {
    if (method == NoiseLevel::Slight) {
        const std::size_t d = levenshtein(from, to);
        t.expect(d >= 1 && d <= std::max<std::size_t>(1, from.size() / 3), where + " slight distance " + std::to_string(d));
        return;
    }
    // Medium: the exact reversal, or a nonsense name within bounds.
    const bool reversal = to == reversed(from) && !is_palindrome(from);
    const bool nonsense = lower_letters(to) && to.size() >= bounds.min_len && to.size() <= bounds.max_len;
    t.expect(to != from && (reversal || nonsense), where + " medium name '" + to + "' from '" + from + "'");
}

void check_case(Tally& t, const TestCase& src, const PerturbedCase& p) {
    const std::string where = p.id;
    if (p.tools.size() != src.tools.size()) {
        t.fail(where + " tool count changed");
        return;
    }
    const std::string addendum_prefix = "A mandatory parameter. To use this tool you must set it to exactly '";

    // Names stay unique and descriptions untouched.
    std::set<std::string> tool_names;
    for (std::size_t i = 0; i < p.tools.size(); ++i) {
        const Tool& o = src.tools[i];
        const Tool& n = p.tools[i];
        tool_names.insert(n.name);
        t.expect(n.description == o.description, where + " tool description changed");
        t.expect(!is_meta_tool(n.name), where + " tool renamed to a meta tool");
        const bool injected = p.mapping.injected_params.contains(o.name);
        t.expect(n.parameters.size() == o.parameters.size() + (injected ? 1 : 0), where + " parameter count");
        std::set<std::string> param_names;
        for (std::size_t j = 0; j < n.parameters.size(); ++j) {
            param_names.insert(n.parameters[j].name);
            if (j < o.parameters.size()) {
                t.expect(n.parameters[j].description == o.parameters[j].description, where + " parameter description changed");
                t.expect(n.parameters[j].value_type == o.parameters[j].value_type &&
                             n.parameters[j].required == o.parameters[j].required &&
                             n.parameters[j].enum_values == o.parameters[j].enum_values,
                         where + " parameter schema changed");
            }
        }
        t.expect(param_names.size() == n.parameters.size(), where + " duplicate parameter names in " + n.name);
    }
    t.expect(tool_names.size() == p.tools.size(), where + " duplicate tool names");

    // Tool-name method.
    if (p.tool_method) {
        const NoiseLevel m = *p.tool_method;
        std::size_t changed = 0;
        std::multiset<std::string> before, after;
        for (std::size_t i = 0; i < p.tools.size(); ++i) {
            before.insert(src.tools[i].name);
            after.insert(p.tools[i].name);
            if (p.tools[i].name == src.tools[i].name) continue;
            ++changed;
            if (m != NoiseLevel::Heavy) check_renamed(t, m, src.tools[i].name, p.tools[i].name, kToolNonsense, where);
        }
        if (m == NoiseLevel::Heavy) {
            t.expect(changed == p.tools.size(), where + " exchange left a fixed point");
            t.expect(before == after, where + " exchange changed the name multiset");
        } else {
            t.expect(changed == ceil_half(p.tools.size()), where + " renamed " + std::to_string(changed) + " tools");
        }
    } else {
        for (std::size_t i = 0; i < p.tools.size(); ++i)
            t.expect(p.tools[i].name == src.tools[i].name, where + " tool renamed without a tool method");
    }

    // Parameter method.
    if (p.param_method) {
        const NoiseLevel m = *p.param_method;
        std::size_t touched_tools = 0;
        for (std::size_t i = 0; i < p.tools.size(); ++i) {
            const Tool& o = src.tools[i];
            const Tool& n = p.tools[i];
            std::size_t changed = 0;
            std::multiset<std::string> before, after;
            for (std::size_t j = 0; j < o.parameters.size(); ++j) {
                before.insert(o.parameters[j].name);
                after.insert(n.parameters[j].name);
                if (n.parameters[j].name == o.parameters[j].name) continue;
                ++changed;
                if (m != NoiseLevel::Heavy)
                    check_renamed(t, m, o.parameters[j].name, n.parameters[j].name, kParamNonsense, where);
            }
            const bool injected = n.parameters.size() > o.parameters.size();
            if (m != NoiseLevel::Heavy) {
                t.expect(changed == ceil_half(o.parameters.size()), where + " renamed " + std::to_string(changed) + " params");
                t.expect(!injected, where + " injection outside heavy");
                continue;
            }
            if (changed == 0 && !injected) continue;
            ++touched_tools;
            if (injected) {
                t.expect(changed == 0, where + " injection combined with a shuffle");
                const Parameter& extra = n.parameters.back();
                const auto& ip = p.mapping.injected_params.at(o.name);
                const std::string content = ip.gold_content;
                t.expect(extra.name.size() >= 1 && extra.name.size() <= 5, where + " addendum name '" + extra.name + "'");
                t.expect(o.find_parameter(extra.name) == nullptr, where + " addendum name collides");
                t.expect(content.size() >= 1 && content.size() <= 3 && alnum_lower(content),
                         where + " addendum content '" + content + "'");
                t.expect(extra.description == addendum_prefix + content + "'.", where + " addendum description");
                t.expect(extra.required, where + " addendum not required");
                if (src.gold.tool_name == o.name)
                    t.expect(p.gold.parameters.contains(extra.name) && p.gold.contents.at(extra.name) == content,
                             where + " addendum missing from gold");
            } else {
                t.expect(o.parameters.size() >= 2, where + " shuffle on a tool with < 2 parameters");
                t.expect(changed == o.parameters.size(), where + " shuffle left a fixed point");
                t.expect(before == after, where + " shuffle changed the name multiset");
            }
        }
        if (m == NoiseLevel::Heavy)
            t.expect(touched_tools == ceil_half(p.tools.size()), where + " heavy touched " + std::to_string(touched_tools));
    } else {
        for (std::size_t i = 0; i < p.tools.size(); ++i)
            t.expect(p.tools[i].parameters == src.tools[i].parameters, where + " parameters changed without a method");
    }
}

Outcome noise_invariants() {
    Tally t;
    std::size_t perturbations = 0;

    // Whole cases, every level and target.
    const auto cases = random_catalog(2024, 400);
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const TestCase& c = cases[k];
        for (NoiseLevel level : {NoiseLevel::Slight, NoiseLevel::Medium, NoiseLevel::Heavy})
            for (PerturbationTarget target : {PerturbationTarget::ToolNames, PerturbationTarget::ParameterNames}) {
                check_case(t, c, perturb_case(c, level, target, k * 31 + static_cast<std::uint64_t>(level)));
                ++perturbations;
            }
        check_case(t, c, perturb_case(c, NoiseLevel::Union, PerturbationTarget::Both, k));
        ++perturbations;
    }

    // Primitives at volume.
    const std::vector<std::string> names = {"a", "ab", "get_weather", "predict_age", "x1", "translate_text", "q", "zz", "level"};
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(seed);
        for (const auto& name : names) {
            const std::string s = slight_perturb_name(name, rng);
            const std::size_t d = levenshtein(name, s);
            t.expect(d >= 1 && d <= std::max<std::size_t>(1, name.size() / 3), "slight '" + name + "' -> '" + s + "'");
            ++perturbations;
        }
        for (const std::string name : {"get_weather", "level", "abba", "rotator", "predict_age"}) {
            const std::string r = reverse_or_nonsense(name, rng, kToolNonsense);
            const bool ok = (!is_palindrome(name) && r == reversed(name)) ||
                            (lower_letters(r) && r.size() >= 3 && r.size() <= 10 && r != name);
            t.expect(ok, "medium '" + name + "' -> '" + r + "'");
            if (is_palindrome(name)) t.expect(r != name, "palindrome kept");
            ++perturbations;
        }
    }
    std::set<std::string> taken;
    Rng nonsense_rng(99);
    for (int i = 0; i < 1000; ++i) {
        const std::string s = nonsense_string(nonsense_rng, kParamNonsense, taken);
        t.expect(!taken.contains(s) && lower_letters(s) && s.size() >= 2 && s.size() <= 5, "nonsense '" + s + "'");
        taken.insert(s);
        ++perturbations;
    }
    CaseGen gen(77);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        std::set<std::string> used;
        std::vector<Tool> tools;
        const std::size_t n = 2 + seed % 9;
        for (std::size_t i = 0; i < n; ++i) tools.push_back({gen.unique_word(used, 3, 10), "d", {}});
        Rng rng(seed);
        const NameMapping m = exchange_tool_names(tools, rng);
        std::multiset<std::string> before, after;
        bool fixed = false;
        for (const auto& tool : tools) {
            const std::string to = m.tool_name(tool.name);
            fixed = fixed || to == tool.name;
            before.insert(tool.name);
            after.insert(to);
        }
        t.expect(!fixed && before == after, "exchange of " + std::to_string(n) + " tools");
        ++perturbations;

        Tool small{"t", "d", {}};
        if (seed % 2) small.parameters.push_back({"only", "", ValueType::String, true, std::nullopt});
        const ParamNoiseOutcome out = heavy_parameter_noise(small, rng);
        t.expect(out.injected.has_value() && out.renames.empty(), "tool with < 2 parameters not injected");
        if (out.injected) {
            const auto& ip = *out.injected;
            t.expect(ip.parameter.name.size() <= 5 && ip.gold_content.size() >= 1 && ip.gold_content.size() <= 3,
                     "addendum sizes");
        }
        ++perturbations;
    }
    return t.outcome(std::to_string(perturbations) + " perturbations, " + std::to_string(t.checks()) + " checks, 0 violations");
}

// 3. Gating against the reference scorer.

Outcome scoring_gating() {
    Tally t;
    std::mt19937_64 rng(4242);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    const std::vector<std::string> tools = {"a", "b", "a ", "A"};
    const std::vector<std::string> keys = {"p", "q", "r", "s"};
    const std::vector<std::string> values = {"x", " x", "x\t", "y", "", "X", "x y"};
    const int pairs = 20000;
    for (int i = 0; i < pairs; ++i) {
        GoldCall g;
        g.tool_name = tools[pick(2)];
        ModelAction a;
        a.tool_name = tools[pick(tools.size())];
        for (const auto& k : keys) {
            if (pick(2)) {
                g.parameters.insert(k);
                g.contents[k] = values[pick(values.size())];
            }
            if (pick(2)) a.arguments[k] = values[pick(values.size())];
        }
        const StageScores got = score_action(a, g);
        t.expect(got == reference_scores(a, g), "pair " + std::to_string(i) + " disagrees");
        t.expect(got.cf <= got.pi && got.pi <= got.ts, "pair " + std::to_string(i) + " breaks gating");
    }
    return t.outcome(std::to_string(pairs) + " random pairs, 0 disagreements");
}

// 4. Noise correction.

Outcome noise_correction() {
    Tally t;
    PerturbedCase clean;
    clean.id = clean.base = "w";
    clean.scenario = "info";
    clean.tools = {{"predict_age", "Age from name.", {{"names", "", ValueType::String, true, std::nullopt}}},
                   {"get_weather", "Weather.", {{"city", "", ValueType::String, true, std::nullopt}}}};
    clean.gold = {"predict_age", {"names"}, {{"names", "Maria"}}};
    PerturbedCase noisy = clean;
    noisy.level = NoiseLevel::Slight;
    noisy.target = PerturbationTarget::ToolNames;
    noisy.mapping.tool_renames["predict_age"] = "predOict_aTge";
    noisy.tools[0].name = "predOict_aTge";
    noisy.gold.tool_name = "predOict_aTge";
    const char* answer = "Thought: estimate the age.\nAction: predict_age\nAction Input: {\"names\": \"Maria\"}";

    const EvalRecord n = evaluate_case(noisy, answer);
    const EvalRecord c = evaluate_case(clean, answer);
    t.expect(n.scores.ts == 0 && n.noise_corrected, "renamed environment: ts=" + std::to_string(n.scores.ts));
    t.expect(c.scores.ts == 1 && !c.noise_corrected, "clean environment: ts=" + std::to_string(c.scores.ts));

    // The same law through the real generator on the shipped demo catalog.
    std::size_t through_pipeline = 0;
    for (const TestCase& src : parse_cases(read_file(data_path("demo/catalog.json")))) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const PerturbedCase p = perturb_case(src, NoiseLevel::Slight, PerturbationTarget::ToolNames, seed);
            if (p.gold.tool_name == src.gold.tool_name) continue;
            std::string args;
            for (const auto& [k, v] : src.gold.contents) args += (args.empty() ? "" : ", ") + json(k).dump() + ": " + json(v).dump();
            const std::string text = "Action: " + src.gold.tool_name + "\nAction Input: {" + args + "}";
            const EvalRecord r = evaluate_case(p, text);
            t.expect(r.scores.ts == 0 && r.noise_corrected, p.id + " not flagged");
            const EvalRecord base = evaluate_case(perturb_case(src, NoiseLevel::Clean, std::nullopt, 0), text);
            t.expect(base.scores.ts == 1 && !base.noise_corrected, p.id + " clean counterpart");
            ++through_pipeline;
            break;
        }
    }
    return t.outcome("fixture ts 0 with noise_corrected, clean ts 1; " + std::to_string(through_pipeline) +
                     " demo cases agree");
}

// 5. Welch's ANOVA.

std::vector<ScoreGroup> as_groups(const std::vector<std::vector<double>>& values) {
    std::vector<ScoreGroup> out;
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back({"g" + std::to_string(i), values[i]});
    return out;
}

Outcome welch() {
    Tally t;
    double worst = 0;
    for (const auto& fx : anova_fixtures()) {
        const AnovaResult r = welch_anova(as_groups(fx.groups));
        const double df = std::max(std::fabs(r.f_statistic - fx.f), std::fabs(r.p_value - fx.p));
        worst = std::max(worst, df);
        t.expect(df <= 1e-6, std::string(fx.name) + " off by " + std::to_string(df));
    }
    const AnovaResult same = welch_anova(as_groups({{1, 1, 1}, {1, 1}, {1, 1, 1, 1}}));
    t.expect(same.f_statistic == 0.0 && same.p_value == 1.0, "identical groups gave F=" + std::to_string(same.f_statistic));
    const AnovaResult shifted = welch_anova(as_groups({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
    t.expect(shifted.f_statistic == 0.0 && std::fabs(shifted.p_value - 1.0) < 1e-12, "identical spread groups");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", worst);
    return t.outcome("5 datasets, max |dF|,|dp| = " + std::string(buf) + "; identical groups F=0 p=1");
}

// 6. Rouge-L.

Outcome rouge() {
    Tally t;
    // LCS is invariant under renaming tokens on both sides, so the first
    // sequence only needs to range over first-occurrence-ordered labelings.
    const auto seqs = all_sequences(8, {"a", "b", "c"});
    std::vector<std::string> joined;
    std::vector<Tokens> tokens;
    for (const auto& s : seqs) {
        joined.push_back(join(s));
        tokens.push_back(tokenize(joined.back()));
    }
    auto canonical = [](const Tokens& s) {
        std::string next = "a";
        std::map<std::string, std::string> seen;
        for (const auto& x : s) {
            if (!seen.contains(x)) {
                if (x != next) return false;
                seen[x] = next;
                next[0]++;
            }
        }
        return true;
    };
    std::size_t pairs = 0, firsts = 0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        if (!canonical(seqs[i])) continue;
        ++firsts;
        for (std::size_t j = 0; j < seqs.size(); ++j) {
            const std::size_t want = table_lcs(seqs[i], seqs[j]);
            const std::size_t got = lcs_length(tokens[i], tokens[j]);
            ++pairs;
            if (got != want) t.fail("lcs '" + joined[i] + "' / '" + joined[j] + "'");
            if (seqs[i].empty() || seqs[j].empty()) continue;
            const double r = 2.0 * static_cast<double>(got) / static_cast<double>(seqs[i].size() + seqs[j].size());
            if (std::fabs(r - oracle_rouge(seqs[i], seqs[j], want)) > 1e-12) t.fail("f-measure '" + joined[i] + "'");
        }
    }
    // rouge_l itself, string in and string out, on every pair up to length 5.
    std::size_t string_pairs = 0;
    for (std::size_t i = 0; i < seqs.size() && seqs[i].size() <= 5; ++i)
        for (std::size_t j = 0; j < seqs.size() && seqs[j].size() <= 5; ++j) {
            const double want = oracle_rouge(seqs[i], seqs[j], table_lcs(seqs[i], seqs[j]));
            if (std::fabs(rouge_l(joined[i], joined[j]) - want) > 1e-12) t.fail("rouge '" + joined[i] + "' / '" + joined[j] + "'");
            ++string_pairs;
        }

    std::mt19937_64 rng(8);
    const std::vector<std::string> vocab = {"the", "The", "weather", "paris", "a", "tool", "FIND", "find", "x"};
    const std::vector<std::string> gaps = {" ", "  ", "\t", " \n "};
    auto sentence = [&] {
        const std::size_t len = std::uniform_int_distribution<std::size_t>(9, 40)(rng);
        std::string out;
        for (std::size_t k = 0; k < len; ++k) {
            if (k) out += gaps[rng() % gaps.size()];
            out += vocab[rng() % vocab.size()];
        }
        return out;
    };
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::string a = sentence(), b = sentence();
        const Tokens ta = split_lower(a), tb = split_lower(b);
        const double d = std::fabs(rouge_l(a, b) - oracle_rouge(ta, tb, table_lcs(ta, tb)));
        worst = std::max(worst, d);
        if (d > 1e-12) t.fail("random pair " + std::to_string(i));
    }

    const auto kept = dedup_queries(kDedupCandidates, kDedupPool, 0.55);
    const auto expected = oracle_dedup(kDedupCandidates, kDedupPool, 0.55);
    t.expect(kept == expected, "dedup kept " + std::to_string(kept.size()) + ", oracle " + std::to_string(expected.size()));
    return t.outcome(std::to_string(pairs) + " LCS pairs (" + std::to_string(firsts) + " canonical x " +
                     std::to_string(seqs.size()) + "), " + std::to_string(string_pairs) +
                     " string pairs, 1000 random pairs, dedup " + std::to_string(kept.size()) + "/" +
                     std::to_string(kDedupCandidates.size()) + " kept as oracle");
}

// 7. End-to-end scripted run.

void pipeline(const std::string& dir, int concurrency) {
    std::ostringstream log;
    const RunConfig c = demo_config(dir, concurrency);
    cmd_generate(c, log);
    cmd_run(c, log);
    cmd_score(c, log);
}

Outcome end_to_end() {
    Tally t;
    const std::string a = scratch_dir("accept_e2e_a");
    const auto start = std::chrono::steady_clock::now();
    pipeline(a, 1);
    const double elapsed = seconds_since(start);
    t.expect(elapsed < 10.0, "pipeline took " + fmt(elapsed) + " s");

    const json results = json::parse(read_file(a + "/results.json"));
    const json expected = json::parse(read_file(testsupport::test_data_path("demo_expected.json")));
    for (const char* key : {"means", "scenario_means", "hallucinations", "noise_corrections"})
        t.expect(results[key] == expected[key], std::string(key) + " differ");
    for (const char* key : {"f", "p", "df1", "df2"})
        t.expect(std::fabs(results["anova"][key].get<double>() - expected["anova"][key].get<double>()) <= 1e-6,
                 std::string("anova ") + key);

    // Every stage/level cell of the designed table is exercised: no cell is 0 or 100.
    for (const auto& [level, stages] : results["means"].items())
        for (const auto& [stage, v] : stages.items())
            t.expect(v.get<double>() > 0 && v.get<double>() < 100, level + "/" + stage + " is degenerate");

    const std::string b = scratch_dir("accept_e2e_b");
    pipeline(b, 8);
    const auto first = snapshot(a);
    t.expect(first == snapshot(b), "concurrency 1 and 8 differ");
    pipeline(a, 8);
    t.expect(snapshot(a) == first, "second run differs");
    return t.outcome("table, ANOVA (F=" + fmt(results["anova"]["f"].get<double>(), 4) + "), " +
                     std::to_string(results["hallucinations"]["total"].get<int>()) +
                     " hallucinations match; identical at concurrency 1/8; " + fmt(elapsed, 3) + " s");
}

// 8. Augmentation pipeline.

Outcome augmentation() {
    Tally t;
    const auto cases = parse_cases(read_file(data_path("demo/catalog.json")));
    const auto trajectories = parse_trajectories(read_file(data_path("demo/trajectories.jsonl")));
    std::size_t total_turns = 0;
    for (const auto& tr : trajectories) total_turns += tr.turns.size();

    const std::string dir = scratch_dir("accept_augment");
    std::ostringstream log;
    cmd_augment(demo_config(dir), log);
    const json manifest = json::parse(read_file(dir + "/manifest_augment.json"));
    t.expect(manifest["counts"] == json{{"clean", 10}, {"slight", 3}, {"medium", 3}, {"heavy", 3}, {"union", 1}},
             "counts " + manifest["counts"].dump());

    std::size_t rewritten_turns = 0, lines = 0;
    std::istringstream in(read_file(dir + "/augmented_trajectories.jsonl"));
    for (std::string line; std::getline(in, line);) rewritten_turns += json::parse(line)["turns"].size();
    std::istringstream rec(read_file(dir + "/training_records.jsonl"));
    for (std::string line; std::getline(rec, line);) ++lines;
    t.expect(lines == rewritten_turns && manifest["records"] == lines,
             "records " + std::to_string(lines) + " vs turns " + std::to_string(rewritten_turns));

    // Consistency law over many seeds.
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const AugmentResult r = augment_trajectories(trajectories, cases, parse_plan("slight=10,medium=10,heavy=10,union=10"), seed);
        t.expect(r.errors.empty(), "seed " + std::to_string(seed) + " rewrite errors");
        std::size_t turns = 0;
        for (const auto& aug : r.trajectories) {
            turns += aug.trajectory.turns.size();
            const TestCase* src = nullptr;
            for (const auto& c : cases)
                if (c.id == aug.environment.base) src = &c;
            const Trajectory* original = nullptr;
            for (const auto& tr : trajectories)
                if (tr.id == aug.trajectory.id) original = &tr;
            if (src == nullptr || original == nullptr || original->turns.size() != aug.trajectory.turns.size()) {
                t.fail("seed " + std::to_string(seed) + " lost trajectory " + aug.trajectory.id);
                continue;
            }
            for (std::size_t k = 0; k < original->turns.size(); ++k) {
                if (reference_scores(original->turns[k].action, src->gold) != StageScores{1, 1, 1}) continue;
                t.expect(reference_scores(aug.trajectory.turns[k].action, aug.environment.gold) == StageScores{1, 1, 1},
                         aug.environment.id + " turn " + std::to_string(k + 1));
                ++checked;
            }
        }
        t.expect(export_records(r.trajectories).size() == turns, "seed " + std::to_string(seed) + " record count");
    }
    t.expect(checked > 0, "no correct turns checked");
    return t.outcome("3/3/3/1 (+10 clean) exact; " + std::to_string(lines) + " records = turns; " +
                     std::to_string(checked) + " correct turns stay (1,1,1) over 100 seeds; " +
                     std::to_string(total_turns) + " source turns");
}

// 9. Determinism.

Outcome determinism() {
    Tally t;
    const std::string a = scratch_dir("accept_det_a");
    const std::string b = scratch_dir("accept_det_b");
    std::ostringstream log;
    for (const std::string& dir : {a, b}) {
        const RunConfig c = demo_config(dir, dir == a ? 1 : 8);
        cmd_generate(c, log);
        cmd_run(c, log);
        cmd_score(c, log);
        cmd_augment(c, log);
    }
    const auto first = snapshot(a);
    t.expect(first == snapshot(b), "separate directories differ");

    const RunConfig c = demo_config(a);
    const std::vector<std::pair<const char*, std::function<int(const RunConfig&, std::ostream&)>>> commands = {
        {"generate", cmd_generate}, {"score", cmd_score}, {"augment", cmd_augment}};
    for (const auto& [name, cmd] : commands) {
        cmd(c, log);
        t.expect(snapshot(a) == first, std::string(name) + " is not idempotent");
    }
    return t.outcome(std::to_string(first.size()) + " output files byte-identical across reruns and directories");
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"case-count law", case_count_law},
        {"noise invariants", noise_invariants},
        {"scoring gating", scoring_gating},
        {"noise-correction error", noise_correction},
        {"Welch's ANOVA", welch},
        {"Rouge-L and dedup", rouge},
        {"end-to-end scripted run", end_to_end},
        {"augmentation pipeline", augmentation},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %zu %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                    seconds_since(start));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
