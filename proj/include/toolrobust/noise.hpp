#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "toolrobust/catalog.hpp"
#include "toolrobust/rng.hpp"

namespace toolrobust {

enum class NoiseKind { Insertion, Omission, Substitution, Reversal, Nonsense, Exchange, Addendum };
enum class NoiseLevel { Clean, Slight, Medium, Heavy, Union };
enum class PerturbationTarget { ToolNames, ParameterNames, Both };

inline constexpr NoiseLevel kAllLevels[] = {NoiseLevel::Clean, NoiseLevel::Slight, NoiseLevel::Medium,
                                            NoiseLevel::Heavy, NoiseLevel::Union};

std::string_view to_string(NoiseKind k);
std::string_view to_string(NoiseLevel level);
std::string_view to_string(PerturbationTarget target);
std::optional<NoiseLevel> level_from_string(std::string_view s);
std::optional<PerturbationTarget> target_from_string(std::string_view s);

class NoiseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Length range for random replacement names.
struct NameBounds {
    std::size_t min_len;
    std::size_t max_len;
};
inline constexpr NameBounds kToolNonsense{3, 10};
inline constexpr NameBounds kParamNonsense{2, 5};
inline constexpr std::size_t kMaxAddendumContent = 3;

struct InjectedParam {
    Parameter parameter;
    std::string gold_content;

    bool operator==(const InjectedParam&) const = default;
};

// Original-to-perturbed provenance for one case. Keys always use original
// names; absent entries mean the name was left unchanged.
struct NameMapping {
    std::map<std::string, std::string> tool_renames;
    std::map<std::pair<std::string, std::string>, std::string> param_renames;  // (tool, param) -> new name
    std::map<std::string, InjectedParam> injected_params;                       // tool -> injected parameter

    std::string tool_name(const std::string& original) const;
    std::string param_name(const std::string& tool, const std::string& param) const;
    bool empty() const { return tool_renames.empty() && param_renames.empty() && injected_params.empty(); }
    bool operator==(const NameMapping&) const = default;
};

struct PerturbedCase {
    std::string id;  // unique within one environment file
    std::string base;
    std::string scenario;
    std::string query;
    NoiseLevel level = NoiseLevel::Clean;
    std::optional<PerturbationTarget> target;  // empty for Clean
    std::uint64_t seed = 0;
    std::vector<Tool> tools;
    GoldCall gold;
    std::vector<Turn> prior_turns;
    NameMapping mapping;
    // Which level's tool-name and parameter method was applied; Union records both.
    std::optional<NoiseLevel> tool_method;
    std::optional<NoiseLevel> param_method;

    bool operator==(const PerturbedCase&) const = default;
};

// Insertion, omission or substitution at k distinct positions, where
// 1 <= k <= max(1, len/3). The result differs from `name` and avoids `existing`.
std::string slight_perturb_name(std::string_view name, Rng& rng, const std::set<std::string>& existing = {});

std::string nonsense_string(Rng& rng, NameBounds bounds, const std::set<std::string>& existing = {});

// Reversal with probability 1/2, otherwise a nonsense name. Palindromes and
// reversals that collide with `existing` fall through to the nonsense branch.
std::string reverse_or_nonsense(std::string_view name, Rng& rng, NameBounds bounds,
                                const std::set<std::string>& existing = {});

// Fixed-point-free permutation of all tool names.
NameMapping exchange_tool_names(const std::vector<Tool>& tools, Rng& rng);

std::string addendum_description(std::string_view content);
std::optional<std::string> extract_addendum_content(std::string_view description);

// Always injects: a required parameter with a fresh name of at most 5 characters
// whose description dictates a 1 to 3 character value.
InjectedParam inject_addendum_param(const Tool& tool, Rng& rng);

struct ParamNoiseOutcome {
    std::optional<InjectedParam> injected;
    std::map<std::string, std::string> renames;
};

// Heavy parameter noise for one selected tool. Tools with fewer than two
// parameters always get an injected parameter; otherwise it is either an
// injection or a shuffle of the existing names, each with probability 1/2.
ParamNoiseOutcome heavy_parameter_noise(const Tool& tool, Rng& rng);

std::vector<Tool> apply_mapping(const std::vector<Tool>& tools, const NameMapping& mapping);
GoldCall remap_gold(const GoldCall& gold, const NameMapping& mapping);
// Renames the tool and argument names of a call; calls to a tool that gained
// an injected parameter receive it with its gold content.
ModelAction remap_action(const ModelAction& action, const NameMapping& mapping);

std::uint64_t case_seed(std::uint64_t run_seed, std::string_view case_id, std::optional<PerturbationTarget> target,
                        NoiseLevel level);

PerturbedCase perturb_case(const TestCase& c, NoiseLevel level, std::optional<PerturbationTarget> target,
                           std::uint64_t seed);

// Slight, Medium and Heavy yield a tool-name variant and a parameter variant
// per case (in that order); Clean and Union yield one case each.
std::vector<PerturbedCase> build_environment(const std::vector<TestCase>& cases, NoiseLevel level,
                                             std::uint64_t seed);

// Checks every structural property a perturbed case must keep relative to its
// source. Empty means the case is consistent.
std::vector<Violation> verify_perturbation(const TestCase& original, const PerturbedCase& perturbed);

json to_json(const NameMapping& m);
NameMapping mapping_from_json(const json& j, const std::string& path);
json to_json(const PerturbedCase& c);
PerturbedCase perturbed_case_from_json(const json& j, const std::string& path);

struct Environment {
    NoiseLevel level = NoiseLevel::Clean;
    std::uint64_t seed = 0;
    std::vector<PerturbedCase> cases;
};

std::string serialize_environment(const Environment& env);
Environment parse_environment(std::string_view document);

}  // namespace toolrobust
