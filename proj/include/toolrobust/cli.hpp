#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "toolrobust/augment.hpp"
#include "toolrobust/backend.hpp"
#include "toolrobust/eval.hpp"
#include "toolrobust/noise.hpp"

namespace toolrobust {

class CliError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string catalog_path;
    std::vector<NoiseLevel> levels{std::begin(kAllLevels), std::end(kAllLevels)};
    std::uint64_t seed = 0;
    BackendConfig backend;
    std::string out_dir = ".";
    std::string env_dir;  // where environments are read from; defaults to out_dir
    Stage anova_stage = Stage::ContentFilling;
    std::optional<std::string> scenario;

    // augment
    std::string trajectories_path;
    std::optional<AugmentationPlan> plan;
    std::string candidates_path;  // optional query dedup input, one query per line
    std::string pool_path;
    double dedup_threshold = kDedupThreshold;

    std::string results_path;  // report; defaults to <out>/results.json
};

std::string environment_path(const std::string& dir, NoiseLevel level);
std::string transcript_path(const std::string& dir, NoiseLevel level);

// Each command writes its outputs under config.out_dir and returns the process
// exit code. Fatal problems raise CliError or the module's own error types.
int cmd_generate(const RunConfig& config, std::ostream& log);
int cmd_run(const RunConfig& config, std::ostream& log);
int cmd_score(const RunConfig& config, std::ostream& log);
int cmd_augment(const RunConfig& config, std::ostream& log);
int cmd_report(const RunConfig& config, std::ostream& out);

std::vector<NoiseLevel> parse_levels(std::string_view text);
std::string hex64(std::uint64_t v);

}  // namespace toolrobust
