#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <variant>

#include "cotc/gateway.hpp"
#include "cotc/record.hpp"

namespace cotc {

inline constexpr std::string_view kTeacherSystemPrompt =
    "You are a helpful assistant to think step by step. Provide your reasoning steps within "
    "<think></think> tags and give your final answer within <answer></answer> tags.";

struct TeacherConfig {
    std::string model_name = "qwen-vl-max";
    double temperature = 0.5;
    int max_output_tokens = 8192;
    std::string system_prompt{kTeacherSystemPrompt};
};

// User turn of the teacher query. `{question}` is substituted verbatim.
std::string render_teacher_query(std::string_view question);
ChatRequest render_teacher_prompt(const SeedSample& sample, const TeacherConfig& config);

enum class TraceError { MissingThink, MissingAnswer, DuplicateBlock, AnswerBeforeThink, UnclosedTag, StrayText };
std::string_view to_string(TraceError e);

using Tokenizer = std::function<std::size_t(std::string_view)>;

struct TraceParseOptions {
    bool strict = false;  // reject text outside the two blocks
    Tokenizer tokenizer;  // defaults to count_tokens
};

using TraceParse = std::variant<DistilledTrace, TraceError>;

// Total: every input yields a trace or a typed error. Verdict precedence:
// duplicate tag > missing think > missing answer > unclosed/misordered pair >
// answer before think > (strict) stray text.
TraceParse parse_structured_trace(std::string_view raw, const TraceParseOptions& options = {});

struct DistillOptions {
    TraceParseOptions parse;
};

// Teacher call + parse. Gateway errors propagate and leave the input record
// untouched (still Seeded) for resume.
CuratedRecord distill(const CuratedRecord& record, const TeacherConfig& config, const ChatClient& teacher,
                      const DistillOptions& options = {});

}  // namespace cotc
