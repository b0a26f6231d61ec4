#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "toolrobust/catalog.hpp"
#include "toolrobust/noise.hpp"

namespace toolrobust {

enum class Stage { ToolSelection, ParameterIdentification, ContentFilling };
inline constexpr Stage kAllStages[] = {Stage::ToolSelection, Stage::ParameterIdentification, Stage::ContentFilling};

std::string_view to_string(Stage s);
std::string_view stage_label(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);

// Gated 0/1 scores: cf <= pi <= ts.
struct StageScores {
    int ts = 0;
    int pi = 0;
    int cf = 0;

    int at(Stage s) const;
    bool operator==(const StageScores&) const = default;
};

struct EvalRecord {
    std::string case_id;
    std::string base;
    std::string scenario;
    NoiseLevel level = NoiseLevel::Clean;
    std::optional<PerturbationTarget> target;
    StageScores scores;
    bool hallucinated = false;
    bool noise_corrected = false;        // answered an original tool name that was renamed
    bool param_noise_corrected = false;  // used an original parameter name that was renamed
    bool parse_failed = false;
    std::string error;
    std::optional<ModelAction> action;

    bool operator==(const EvalRecord&) const = default;
};

class ReactParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parses a dict-like argument object. Accepts JSON as well as Python-style
// literals (single quotes, bare keys, True/False/None). Scalar values keep
// their source spelling; nested values are kept as compact text.
std::map<std::string, std::string> parse_action_input(std::string_view text);

// Extracts the last Thought / Action / Action Input block.
ModelAction parse_react(std::string_view text);

std::string_view trim(std::string_view s);

int score_tool_selection(const ModelAction& action, const GoldCall& gold);
int score_parameter_identification(int s_ts, const ModelAction& action, const GoldCall& gold);
int score_content_filling(int s_pi, const ModelAction& action, const GoldCall& gold);
StageScores score_action(const ModelAction& action, const GoldCall& gold);

bool detect_hallucination(const ModelAction& action, const std::vector<Tool>& tools);
bool detect_noise_correction(const ModelAction& action, const std::vector<Tool>& tools, const NameMapping& mapping);
bool detect_param_noise_correction(const ModelAction& action, const NameMapping& mapping);

// One model answer for one case. A structured function call, when present,
// takes precedence over the raw text.
struct FunctionCall {
    std::string name;
    json arguments;  // object
};

struct TranscriptEntry {
    std::string id;
    std::string output;
    std::optional<FunctionCall> function_call;
    std::optional<std::string> error;  // backend failure, no answer

    bool answered() const { return !error.has_value(); }
};

json to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const json& j);
std::string serialize_transcript(const std::vector<TranscriptEntry>& entries);  // one JSON object per line
// Lines that fail to parse (e.g. a torn final line) are skipped.
std::vector<TranscriptEntry> parse_transcript(std::string_view text);

ModelAction action_from_function_call(const FunctionCall& call);

EvalRecord evaluate_case(const PerturbedCase& perturbed, std::string_view output);
EvalRecord evaluate_entry(const PerturbedCase& perturbed, const TranscriptEntry& entry);
EvalRecord unanswered_record(const PerturbedCase& perturbed, std::string error);

json to_json(const EvalRecord& r);

}  // namespace toolrobust
