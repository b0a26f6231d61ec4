#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "toolrobust/backend.hpp"
#include "toolrobust/catalog.hpp"
#include "toolrobust/noise.hpp"

namespace toolrobust {

inline constexpr std::size_t kMaxTrajectoryTurns = 9;
inline constexpr double kDedupThreshold = 0.55;

struct Trajectory {
    std::string id;
    std::string source_case;
    std::string query;
    std::vector<Turn> turns;
    std::string final_answer;

    bool operator==(const Trajectory&) const = default;
};

class RewriteError : public std::runtime_error {
public:
    RewriteError(std::string trajectory_id, std::size_t turn, const std::string& what)
        : std::runtime_error("trajectory '" + trajectory_id + "' turn " + std::to_string(turn + 1) + ": " + what),
          trajectory_id_(std::move(trajectory_id)),
          turn_(turn) {}
    const std::string& trajectory_id() const noexcept { return trajectory_id_; }
    std::size_t turn() const noexcept { return turn_; }

private:
    std::string trajectory_id_;
    std::size_t turn_;
};

struct AugmentationPlan {
    std::map<NoiseLevel, std::size_t> counts;  // Clean is implicit: every trajectory

    static AugmentationPlan defaults();  // 3000 / 3000 / 3000 / 1500
    // Proportional scale-down so that no level asks for more than `available`.
    AugmentationPlan scaled_to(std::size_t available) const;
    std::size_t count(NoiseLevel level) const;
};

// "slight=3,medium=3,heavy=3,union=1"
AugmentationPlan parse_plan(std::string_view text);

struct TrainingRecord {
    std::vector<ChatMessage> messages;
    std::string target;
    NoiseLevel level = NoiseLevel::Clean;
    std::string trajectory_id;
    std::size_t turn = 0;
};

// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
// LCS F-measure with beta = 1.
double rouge_l(std::string_view candidate, std::string_view reference);

// Keeps a candidate iff its Rouge-L against every pool item and every
// previously kept candidate is at most `threshold`.
std::vector<std::string> dedup_queries(const std::vector<std::string>& candidates, const std::vector<std::string>& pool,
                                       double threshold = kDedupThreshold);

// Query lines from a generator reply ("1. ...", "- ...", or plain lines).
std::vector<std::string> parse_generated_queries(std::string_view text);

// Rewrites a Clean trajectory into the names of `perturbed`. `source` is the
// Clean case the trajectory was produced against.
Trajectory rewrite_trajectory(const Trajectory& traj, const TestCase& source, const PerturbedCase& perturbed);

std::map<NoiseLevel, std::vector<Trajectory>> sample_plan(const std::vector<Trajectory>& trajectories,
                                                          const AugmentationPlan& plan, std::uint64_t seed);

struct AugmentedTrajectory {
    NoiseLevel level = NoiseLevel::Clean;
    Trajectory trajectory;
    PerturbedCase environment;
};

struct AugmentResult {
    std::vector<AugmentedTrajectory> trajectories;
    std::map<NoiseLevel, std::size_t> counts;
    std::vector<std::string> errors;
};

// Samples per the plan, builds a seeded noisy environment for each sampled
// trajectory and rewrites it. Rewrite failures are collected, not thrown.
AugmentResult augment_trajectories(const std::vector<Trajectory>& trajectories, const std::vector<TestCase>& cases,
                                   const AugmentationPlan& plan, std::uint64_t seed);

// One record per turn; record k carries turns 1..k-1 as context.
std::vector<TrainingRecord> export_records(const std::vector<AugmentedTrajectory>& trajectories);

json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& j, const std::string& path);
std::vector<Trajectory> parse_trajectories(std::string_view jsonl);
json to_json(const TrainingRecord& r);

}  // namespace toolrobust
