#include "cotc/distiller.hpp"

#include <array>

#include "cotc/text.hpp"

namespace cotc {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

struct TagScan {
    std::size_t count = 0;
    std::size_t pos = std::string_view::npos;  // first occurrence
};

TagScan scan(std::string_view text, std::string_view tag) {
    TagScan s;
    for (auto p = text.find(tag); p != std::string_view::npos; p = text.find(tag, p + tag.size())) {
        if (s.count++ == 0) s.pos = p;
    }
    return s;
}

}  // namespace

std::string render_teacher_query(std::string_view question) {
    std::string q;
    q.reserve(question.size() + 400);
    q += "### Image\n";
    q += "<image>\n";
    q += "### Question\n";
    q += question;
    q += "\n### Output Format (Strictly Enforced)\n";
    q += "<think>\n";
    q += "Clearly explain your reasoning step by step. Describe how you arrived at the conclusion. "
         "The reasoning process MUST BE enclosed within <think> </think> tags.\n";
    q += "/<think>\n";
    q += "<answer>\n";
    q += "Your final answer to the user's question.\n";
    q += "</answer>";
    return q;
}

ChatRequest render_teacher_prompt(const SeedSample& sample, const TeacherConfig& config) {
    sample.validate();
    ChatRequest req;
    req.model_name = config.model_name;
    req.temperature = config.temperature;
    req.max_output_tokens = config.max_output_tokens;
    req.messages.push_back({Role::System, config.system_prompt, std::nullopt});
    Message user{Role::User, render_teacher_query(sample.instruction), std::nullopt};
    if (!sample.image_ref.empty()) user.image_ref = sample.image_ref;
    req.messages.push_back(std::move(user));
    req.validate();
    return req;
}

std::string_view to_string(TraceError e) {
    static constexpr std::array<std::string_view, 6> names = {
        "missing_think", "missing_answer", "duplicate_block", "answer_before_think", "unclosed_tag", "stray_text"};
    return names[static_cast<int>(e)];
}

TraceParse parse_structured_trace(std::string_view raw, const TraceParseOptions& options) {
    const TagScan to = scan(raw, kThinkOpen);
    const TagScan tc = scan(raw, kThinkClose);
    const TagScan ao = scan(raw, kAnswerOpen);
    const TagScan ac = scan(raw, kAnswerClose);

    if (to.count > 1 || tc.count > 1 || ao.count > 1 || ac.count > 1) return TraceError::DuplicateBlock;
    if (to.count == 0 && tc.count == 0) return TraceError::MissingThink;
    if (ao.count == 0 && ac.count == 0) return TraceError::MissingAnswer;
    if (to.count == 0 || tc.count == 0 || tc.pos < to.pos) return TraceError::UnclosedTag;
    if (ao.count == 0 || ac.count == 0 || ac.pos < ao.pos) return TraceError::UnclosedTag;
    if (ao.pos < tc.pos) return TraceError::AnswerBeforeThink;

    const auto think_begin = to.pos + kThinkOpen.size();
    const auto answer_begin = ao.pos + kAnswerOpen.size();
    const auto think_end_tag = tc.pos + kThinkClose.size();
    const auto answer_end_tag = ac.pos + kAnswerClose.size();

    const bool stray = !trim(raw.substr(0, to.pos)).empty() ||
                       !trim(raw.substr(think_end_tag, ao.pos - think_end_tag)).empty() ||
                       !trim(raw.substr(answer_end_tag)).empty();
    if (stray && options.strict) return TraceError::StrayText;

    DistilledTrace t;
    t.think_text = std::string(trim(raw.substr(think_begin, tc.pos - think_begin)));
    t.answer_text = std::string(trim(raw.substr(answer_begin, ac.pos - answer_begin)));
    t.raw_text = std::string(raw);
    t.token_count = options.tokenizer ? options.tokenizer(t.think_text) : count_tokens(t.think_text);
    t.stray_text = stray;
    return t;
}

CuratedRecord distill(const CuratedRecord& record, const TeacherConfig& config, const ChatClient& teacher,
                      const DistillOptions& options) {
    if (record.status() != Status::Seeded) {
        throw InvariantError("status", "distill expects a seeded record, got " + std::string(to_string(record.status())));
    }
    const ChatResponse response = teacher.complete(render_teacher_prompt(record.seed, config));
    CuratedRecord out = record;
    auto parsed = parse_structured_trace(response.text, options.parse);
    if (auto* err = std::get_if<TraceError>(&parsed)) {
        std::string detail(to_string(*err));
        if (response.finish_reason == FinishReason::Length) detail += " (output hit max tokens)";
        out.reject(RejectCode::MissingTags, std::move(detail));
    } else {
        out.trace = std::move(std::get<DistilledTrace>(parsed));
        out.advance(Status::Distilled);
    }
    return out;
}

}  // namespace cotc
