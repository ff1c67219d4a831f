#include "cotc/annotator.hpp"

#include <cmath>
#include <optional>

#include "cotc/text.hpp"
#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

const std::string_view kDefaultRubricPrompt =
    R"(You are an expert annotator of multimodal reasoning data. Given an image, an instruction, and a teacher response, assess the sample jointly along three axes.

Reasoning difficulty (1-5), based on the complexity of the underlying vision-language reasoning required:
1 (Very Easy): Object is plainly present; requires simple color or shape identification.
2 (Easy): Involves basic counting of clearly visible items, or straightforward spatial relationships.
3 (Moderate): Requires brief reasoning or identification of common actions or attributes.
4 (Hard): Demands multi-step reasoning, attention to subtle visual cues, or handling rare concepts.
5 (Very Hard): Involves abstract reasoning, complex scene understanding, or highly ambiguous context.

Answer quality (1-5), reflecting estimated correctness, relevance, and completeness of the teacher response:
1 (Very Low): Entirely incorrect or irrelevant answer.
2 (Low): Mostly incorrect, with only minor correct elements present.
3 (Medium): Partially correct; key details are missing or incorrect elements are present.
4 (High): Largely correct, with only minor inaccuracies or omissions.
5 (Very High): Fully accurate, precise, and complete response.

Semantic tags: one or more short, lowercase, open-vocabulary task tags describing the reasoning domain, visual theme, and task type, e.g. object, attribute, scene, spatial, position, layout, direction, chart, table, legend, count, comparison, math, geometry, percentage, physics, code, history, verification, detail.

Output only a JSON object with exactly these keys and nothing else:
{"difficulty": <integer 1-5>, "quality": <integer 1-5>, "tags": ["<tag>", ...]})";

const std::string_view kReaskPrompt =
    R"(Your previous reply could not be parsed. Reply again with only the JSON object {"difficulty": <integer 1-5>, "quality": <integer 1-5>, "tags": ["<tag>", ...]} and no other text.)";

ChatRequest render_scorer_prompt(const CuratedRecord& record, const ScorerConfig& config) {
    if (record.status() != Status::Distilled || !record.trace) {
        throw InvariantError("status", "scoring expects a distilled record, got " +
                                           std::string(to_string(record.status())));
    }
    std::string user;
    user += "### Image\n<image>\n";
    user += "### Instruction\n";
    user += record.seed.instruction;
    user += "\n### Teacher Response\n";
    user += "<think>\n" + record.trace->think_text + "\n</think>\n<answer>\n" + record.trace->answer_text +
            "\n</answer>";
    user += "\n### Task\nScore this sample and output only the JSON object.";

    ChatRequest req;
    req.model_name = config.model_name;
    req.temperature = config.temperature;
    req.max_output_tokens = config.max_output_tokens;
    req.messages.push_back({Role::System, config.rubric_prompt, std::nullopt});
    Message m{Role::User, std::move(user), std::nullopt};
    if (!record.seed.image_ref.empty()) m.image_ref = record.seed.image_ref;
    req.messages.push_back(std::move(m));
    req.validate();
    return req;
}

std::string ScoreJsonError::describe() const {
    switch (kind) {
        case ScoreJsonErrorKind::NoJsonFound: return "no_json_found";
        case ScoreJsonErrorKind::UnbalancedBraces: return "unbalanced_braces";
        case ScoreJsonErrorKind::MissingKey: return "missing_key(" + key + ")";
        case ScoreJsonErrorKind::RangeViolation: return "range_violation(" + key + ")";
        case ScoreJsonErrorKind::EmptyTags: return "empty_tags";
    }
    return "unknown";
}

namespace {

// End (inclusive) of the object opened at `open`, honoring string literals.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::nullopt;
}

std::optional<int> coerce_level(const json& v) {
    double x = 0.0;
    if (v.is_number_integer()) {
        const auto n = v.get<std::int64_t>();
        if (n < 1 || n > 5) return std::nullopt;
        return static_cast<int>(n);
    }
    if (v.is_number_float()) {
        x = v.get<double>();
    } else if (v.is_string()) {
        const auto s = std::string(trim(v.get<std::string>()));
        if (s.empty()) return std::nullopt;
        std::size_t used = 0;
        try {
            x = std::stod(s, &used);
        } catch (const std::exception&) {
            return std::nullopt;
        }
        if (used != s.size()) return std::nullopt;
    } else {
        return std::nullopt;
    }
    if (!std::isfinite(x) || x != std::floor(x) || x < 1 || x > 5) return std::nullopt;
    return static_cast<int>(x);
}

ScoreParse interpret(const json& obj) {
    for (const char* key : {"difficulty", "quality", "tags"}) {
        if (!obj.contains(key) || obj.at(key).is_null()) return ScoreJsonError{ScoreJsonErrorKind::MissingKey, key};
    }
    const auto d = coerce_level(obj.at("difficulty"));
    if (!d) return ScoreJsonError{ScoreJsonErrorKind::RangeViolation, "difficulty"};
    const auto q = coerce_level(obj.at("quality"));
    if (!q) return ScoreJsonError{ScoreJsonErrorKind::RangeViolation, "quality"};

    std::vector<std::string> raw;
    const auto& tags = obj.at("tags");
    if (tags.is_array()) {
        for (const auto& t : tags) {
            if (t.is_string()) raw.push_back(t.get<std::string>());
        }
    } else if (tags.is_string()) {
        const auto s = tags.get<std::string>();
        std::size_t start = 0;
        while (start <= s.size()) {
            const auto comma = s.find(',', start);
            raw.push_back(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    auto norm = normalize_tags(raw);
    if (norm.empty()) return ScoreJsonError{ScoreJsonErrorKind::EmptyTags, "tags"};
    return Annotation{*d, *q, std::move(norm)};
}

}  // namespace

ScoreParse extract_json_object(std::string_view text) {
    bool saw_unbalanced = false;
    for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
        const auto close = matching_brace(text, open);
        if (!close) {
            saw_unbalanced = true;
            continue;
        }
        json obj;
        try {
            obj = json::parse(text.substr(open, *close - open + 1));
        } catch (const json::parse_error&) {
            continue;
        }
        if (!obj.is_object()) continue;
        return interpret(obj);
    }
    return ScoreJsonError{saw_unbalanced ? ScoreJsonErrorKind::UnbalancedBraces : ScoreJsonErrorKind::NoJsonFound, {}};
}

CuratedRecord annotate(const CuratedRecord& record, const ScorerConfig& config, const ChatClient& scorer,
                       const AnnotateOptions& options, int* calls_out) {
    ChatRequest request = render_scorer_prompt(record, config);
    int calls = 1;
    ScoreParse parsed = extract_json_object(scorer.complete(request).text);
    if (options.reask && std::holds_alternative<ScoreJsonError>(parsed)) {
        request.messages.push_back({Role::User, std::string(kReaskPrompt), std::nullopt});
        ++calls;
        parsed = extract_json_object(scorer.complete(request).text);
    }
    if (calls_out) *calls_out = calls;

    CuratedRecord out = record;
    if (const auto* err = std::get_if<ScoreJsonError>(&parsed)) {
        out.reject(RejectCode::BadScoreJson, err->describe());
    } else {
        out.annotation = std::move(std::get<Annotation>(parsed));
        out.advance(Status::Annotated);
    }
    return out;
}

}  // namespace cotc
