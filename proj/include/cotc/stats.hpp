#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cotc/record.hpp"
#include "cotc/selector.hpp"

namespace cotc {

enum class Axis { Difficulty, Quality };
std::string_view to_string(Axis a);

// Rounds count/total*100 half-up to hundredths, returned as an integer
// number of hundredths (46.50% -> 4650).
std::int64_t percent_hundredths(std::size_t count, std::size_t total);
std::string format_hundredths(std::int64_t h);  // 4650 -> "46.50"

struct DistributionReport {
    Axis axis = Axis::Difficulty;
    std::size_t total = 0;
    std::map<int, std::size_t> counts;          // levels 1..5, zeros included
    std::map<int, std::int64_t> percentages;    // hundredths of a percent

    double percent(int level) const { return static_cast<double>(percentages.at(level)) / 100.0; }
    bool operator==(const DistributionReport&) const = default;
};

struct TagFrequency {
    std::string label;
    std::size_t count = 0;
    double fraction = 0.0;  // count / corpus size

    bool operator==(const TagFrequency&) const = default;
};

struct TagFrequencyReport {
    std::size_t top_n = 400;
    std::size_t corpus_size = 0;
    std::vector<TagFrequency> entries;  // count descending, then label ascending

    bool operator==(const TagFrequencyReport&) const = default;
};

// Records must be Annotated or Accepted; an empty corpus is an error.
DistributionReport compute_distribution(const std::vector<CuratedRecord>& records, Axis axis);

// Presence per record. With a cluster model, tags in one cluster collapse to
// the cluster's smallest member tag.
TagFrequencyReport compute_tag_frequency(const std::vector<CuratedRecord>& records, std::size_t top_n,
                                         const TagClusterModel* model = nullptr);

struct StatsBundle {
    DistributionReport difficulty;
    DistributionReport quality;
    TagFrequencyReport tags;
    std::vector<PipelineManifest> manifests;

    bool operator==(const StatsBundle&) const = default;
};

StatsBundle compute_stats(const std::vector<CuratedRecord>& records, std::size_t top_n,
                          const TagClusterModel* model = nullptr);

enum class ReportFormat { Structured, Markdown };

std::string render_report(const StatsBundle& reports, ReportFormat format);
StatsBundle decode_report(std::string_view structured);

}  // namespace cotc
