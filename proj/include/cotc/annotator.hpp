#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "cotc/gateway.hpp"
#include "cotc/record.hpp"

namespace cotc {

// Default scorer instructions: difficulty and quality level definitions,
// tag guidance, and the bare-JSON output contract.
extern const std::string_view kDefaultRubricPrompt;
extern const std::string_view kReaskPrompt;

struct ScorerConfig {
    std::string model_name = "qwen3-vl-flash";
    std::string rubric_prompt{kDefaultRubricPrompt};
    double temperature = 0.0;
    int max_output_tokens = 512;
};

ChatRequest render_scorer_prompt(const CuratedRecord& record, const ScorerConfig& config);

enum class ScoreJsonErrorKind { NoJsonFound, UnbalancedBraces, MissingKey, RangeViolation, EmptyTags };

struct ScoreJsonError {
    ScoreJsonErrorKind kind;
    std::string key;  // offending key for MissingKey / RangeViolation
    std::string describe() const;
    bool operator==(const ScoreJsonError&) const = default;
};

using ScoreParse = std::variant<Annotation, ScoreJsonError>;

// Finds the first balanced top-level JSON object in `text` (prose and code
// fences around it are ignored), coerces difficulty/quality from numbers or
// numeric strings, and normalizes tags.
ScoreParse extract_json_object(std::string_view text);

struct AnnotateOptions {
    bool reask = true;
};

// One scorer call; one re-ask on malformed JSON; then Rejected(BadScoreJson).
// Gateway errors propagate with the input record unchanged.
CuratedRecord annotate(const CuratedRecord& record, const ScorerConfig& config, const ChatClient& scorer,
                       const AnnotateOptions& options = {}, int* calls_out = nullptr);

}  // namespace cotc
