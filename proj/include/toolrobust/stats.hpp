#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "toolrobust/eval.hpp"

namespace toolrobust {

struct ScoreGroup {
    std::string label;
    std::vector<double> values;
};

struct AnovaResult {
    double f_statistic = 0.0;
    double p_value = 1.0;
    double df1 = 0.0;
    double df2 = 0.0;  // infinite in the all-constant-and-equal case
};

class DegenerateVarianceError : public std::runtime_error {
public:
    explicit DegenerateVarianceError(std::string group)
        : std::runtime_error("group '" + group + "' has zero variance and a distinct mean"), group_(std::move(group)) {}
    const std::string& group() const noexcept { return group_; }

private:
    std::string group_;
};

double mean(std::span<const double> values);
// n - 1 denominator; 0 for fewer than two values.
double sample_variance(std::span<const double> values);
double sample_stddev(std::span<const double> values);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double x, double a, double b);
// P(F > f) for an F(df1, df2) variable.
double f_upper_tail(double f, double df1, double df2);

AnovaResult welch_anova(const std::vector<ScoreGroup>& groups);

struct MeansTable {
    std::map<std::pair<NoiseLevel, Stage>, double> overall;  // percentage
    std::map<std::tuple<std::string, NoiseLevel, Stage>, double> by_scenario;
    std::map<NoiseLevel, std::size_t> counts;
    std::vector<std::string> warnings;
};

// Percent means per (level, stage) and per (scenario, level, stage). Levels in
// `expected` that have no records are omitted with a warning.
MeansTable stage_means(const std::vector<EvalRecord>& records, const std::vector<NoiseLevel>& expected = {});

// |mean(level) - mean(Clean)| per (level, stage). Throws if Clean is absent.
std::map<std::pair<NoiseLevel, Stage>, double> delta_vs_clean(const std::map<std::pair<NoiseLevel, Stage>, double>& means);

double extreme_difference(std::span<const double> level_means);

double round2(double v);
std::string format2(double v);

struct Report {
    std::vector<NoiseLevel> levels;
    std::vector<std::string> scenarios;
    Stage anova_stage = Stage::ContentFilling;
    MeansTable means;
    std::map<std::pair<NoiseLevel, Stage>, double> deltas;
    std::map<Stage, double> extreme;
    std::map<Stage, double> stddev;
    std::optional<AnovaResult> anova;
    std::string anova_error;
    std::map<NoiseLevel, std::size_t> hallucinations;
    std::map<NoiseLevel, std::size_t> tool_noise_corrections;
    std::map<NoiseLevel, std::size_t> param_noise_corrections;
    std::map<NoiseLevel, std::size_t> parse_failures;
    std::vector<EvalRecord> records;
    std::vector<std::string> warnings;
};

Report build_report(std::vector<EvalRecord> records, const std::vector<NoiseLevel>& levels, Stage anova_stage);
json to_json(const Report& r);
// Table with one section per stage and one row per level; columns are the
// overall mean followed by each scenario.
std::string render_table(const json& results);

}  // namespace toolrobust
