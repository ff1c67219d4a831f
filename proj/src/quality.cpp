#include "cotc/quality.hpp"

#include <algorithm>
#include <unordered_set>

#include "cotc/error.hpp"
#include "cotc/jsonl.hpp"
#include "cotc/text.hpp"

namespace cotc {

std::vector<std::string> default_placeholder_lexicon() {
    return {
        "[insert",
        "lorem ipsum",
        "your answer here",
        "your reasoning here",
        "todo",
        "<placeholder>",
        "[placeholder]",
        // the teacher template's own instructions echoed back
        "clearly explain your reasoning step by step",
        "your final answer to the user's question",
    };
}

std::vector<std::string> default_instability_lexicon() {
    return {
        "let me restart",
        "start over",
        "scratch that",
        "actually, no wait",
        "let me start again",
        "let me redo this",
        "wait, that's wrong",
    };
}

void Stage1Config::validate() const {
    if (min_tokens < 1) throw InvariantError("min_tokens", "must be positive");
    if (min_tokens >= max_tokens) throw InvariantError("min_tokens", "must be < max_tokens");
    if (repetition_ngram < 1) throw InvariantError("repetition_ngram", "must be positive");
    if (!(repetition_max_ratio > 0.0 && repetition_max_ratio <= 1.0)) {
        throw InvariantError("repetition_max_ratio", "must be in (0,1]");
    }
}

std::vector<std::string> load_lexicon(const std::filesystem::path& path) {
    std::vector<std::string> out;
    for_each_line(path, [&](std::string_view line, std::size_t) { out.emplace_back(trim(line)); });
    return out;
}

Verdict check_length(const DistilledTrace& trace, const Stage1Config& config) {
    if (trace.token_count < config.min_tokens) {
        return RejectReason{RejectCode::TooShort, std::to_string(trace.token_count) + " < " +
                                                      std::to_string(config.min_tokens) + " tokens"};
    }
    if (trace.token_count > config.max_tokens) {
        return RejectReason{RejectCode::TooLong, std::to_string(trace.token_count) + " > " +
                                                     std::to_string(config.max_tokens) + " tokens"};
    }
    return std::nullopt;
}

double repetition_fraction(std::string_view text, std::size_t n, std::size_t* total_ngrams) {
    const auto tokens = tokenize(text);
    const std::size_t total = tokens.size() >= n ? tokens.size() - n + 1 : 0;
    if (total_ngrams) *total_ngrams = total;
    if (total == 0) return 0.0;
    std::unordered_set<std::string> distinct;
    distinct.reserve(total);
    std::string key;
    for (std::size_t i = 0; i < total; ++i) {
        key.clear();
        for (std::size_t k = 0; k < n; ++k) {
            key.append(tokens[i + k]);
            key.push_back('\x1f');
        }
        distinct.insert(key);
    }
    return 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(total);
}

Verdict detect_repetition(std::string_view text, const Stage1Config& config) {
    std::size_t total = 0;
    const double f = repetition_fraction(text, config.repetition_ngram, &total);
    if (total >= config.repetition_min_ngrams && f > config.repetition_max_ratio) {
        return RejectReason{RejectCode::Repetition, "repeated " + std::to_string(config.repetition_ngram) +
                                                        "-gram fraction " + std::to_string(f)};
    }
    return std::nullopt;
}

Verdict detect_placeholder(std::string_view text, const Stage1Config& config) {
    const auto lower = to_lower_ascii(text);
    for (const auto& entry : config.placeholder_lexicon) {
        if (entry.empty()) continue;
        if (lower.find(to_lower_ascii(entry)) != std::string::npos) {
            return RejectReason{RejectCode::Placeholder, "placeholder '" + entry + "'"};
        }
    }
    return std::nullopt;
}

std::vector<std::size_t> instability_hits(std::string_view text, const Stage1Config& config) {
    const auto lower = to_lower_ascii(text);
    std::vector<std::size_t> hits;
    for (const auto& entry : config.instability_lexicon) {
        if (entry.empty()) continue;
        const auto needle = to_lower_ascii(entry);
        for (auto p = lower.find(needle); p != std::string::npos; p = lower.find(needle, p + needle.size())) {
            hits.push_back(p);
        }
    }
    std::sort(hits.begin(), hits.end());
    return hits;
}

Verdict detect_instability(std::string_view text, const Stage1Config& config) {
    const auto hits = instability_hits(text, config);
    if (hits.size() >= 2) {
        return RejectReason{RejectCode::Unstable, std::to_string(hits.size()) + " restart/correction markers"};
    }
    if (hits.size() == 1 && 4 * hits.front() >= 3 * text.size()) {
        return RejectReason{RejectCode::Unstable, "restart marker in final quarter"};
    }
    return std::nullopt;
}

CuratedRecord stage1_filter(const CuratedRecord& record, const Stage1Config& config) {
    CuratedRecord out = record;
    if (out.rejected()) return out;
    if (!out.trace || out.status() == Status::Seeded) {
        out.reject(RejectCode::MissingTags, "no parsed think/answer trace");
        return out;
    }
    const auto& t = *out.trace;
    Verdict v = check_length(t, config);
    if (!v) v = detect_placeholder(t.think_text, config);
    if (!v) v = detect_placeholder(t.answer_text, config);
    if (!v) v = detect_repetition(t.think_text, config);
    if (!v) v = detect_instability(t.think_text, config);
    if (v) out.reject(v->code, std::move(v->detail));
    return out;
}

}  // namespace cotc
