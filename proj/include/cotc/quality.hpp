#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotc/record.hpp"

namespace cotc {

std::vector<std::string> default_placeholder_lexicon();
std::vector<std::string> default_instability_lexicon();

struct Stage1Config {
    std::size_t min_tokens = 20;
    std::size_t max_tokens = 4000;
    std::size_t repetition_ngram = 3;
    double repetition_max_ratio = 0.5;
    std::size_t repetition_min_ngrams = 20;  // below this the text is too short to judge
    std::vector<std::string> placeholder_lexicon = default_placeholder_lexicon();
    std::vector<std::string> instability_lexicon = default_instability_lexicon();

    void validate() const;
};

// One entry per non-blank line, surrounding whitespace trimmed.
std::vector<std::string> load_lexicon(const std::filesystem::path& path);

// nullopt = pass.
using Verdict = std::optional<RejectReason>;

Verdict check_length(const DistilledTrace& trace, const Stage1Config& config);

// 1 - distinct/total over token n-grams; 0 when there are no n-grams.
double repetition_fraction(std::string_view text, std::size_t n, std::size_t* total_ngrams = nullptr);
Verdict detect_repetition(std::string_view text, const Stage1Config& config);

Verdict detect_placeholder(std::string_view text, const Stage1Config& config);

// Non-overlapping, case-insensitive hits of every instability entry; the
// byte offsets of the hits are returned in ascending order.
std::vector<std::size_t> instability_hits(std::string_view text, const Stage1Config& config);
Verdict detect_instability(std::string_view text, const Stage1Config& config);

// Fixed order: format -> length -> placeholder -> repetition -> instability.
// First failure wins. Records already rejected upstream pass through.
CuratedRecord stage1_filter(const CuratedRecord& record, const Stage1Config& config);

}  // namespace cotc
