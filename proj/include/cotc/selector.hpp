#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotc/gateway.hpp"
#include "cotc/kernels.hpp"
#include "cotc/record.hpp"

namespace cotc {

enum class StrategyKind { Random, QualityOnly, DifficultyOnly, QualityAndDifficulty };

struct SelectionStrategy {
    StrategyKind kind = StrategyKind::DifficultyOnly;
    std::size_t n = 0;  // Random only
    int min_quality = 5;
    int min_difficulty = 4;

    static SelectionStrategy random(std::size_t n);
    static SelectionStrategy quality_only(int min_q = 5);
    static SelectionStrategy difficulty_only(int min_d = 4);
    static SelectionStrategy quality_and_difficulty(int min_q = 5, int min_d = 4);

    // "random:N", "quality[:Q]", "difficulty[:D]", "quality-and-difficulty[:Q,D]".
    static SelectionStrategy parse(std::string_view text);
    std::string to_string() const;

    void validate() const;
    // Threshold predicate; Random admits everything.
    bool admits(const Annotation& a) const;
    bool operator==(const SelectionStrategy&) const = default;
};

// Output sorted by id. Records must be Annotated or Accepted.
std::vector<CuratedRecord> select_by_strategy(const std::vector<CuratedRecord>& records,
                                              const SelectionStrategy& strategy, std::uint64_t seed);

// Same selection, keeping the losers: they come back Rejected with
// LowDifficulty (difficulty threshold) or NotSelected (anything else).
struct StrategySplit {
    std::vector<CuratedRecord> kept;
    std::vector<CuratedRecord> dropped;
};
StrategySplit split_by_strategy(const std::vector<CuratedRecord>& records, const SelectionStrategy& strategy,
                                std::uint64_t seed);

struct ClusteringConfig {
    double eps = 0.15;
    std::size_t min_pts = 2;
    Metric metric = Metric::Cosine;

    void validate() const;
    bool operator==(const ClusteringConfig&) const = default;
};

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

inline constexpr int kNoise = -1;

// Labels are 0.. in order of each cluster's lowest-index core point; -1 is noise.
std::vector<int> dbscan(const std::vector<std::vector<double>>& points, const ClusteringConfig& config,
                        Execution exec = Execution::Parallel);

struct TagClusterModel {
    std::map<std::string, int> tag_to_cluster;
    std::map<int, std::vector<double>> cluster_centroids;
    std::map<std::string, std::vector<double>> tag_vectors;
    std::size_t embedding_dim = 0;

    // Centroid for clustered tags, own vector for noise tags.
    const std::vector<double>& effective_vector(const std::string& tag) const;
    std::optional<int> cluster_of(const std::string& tag) const;
    bool same_cluster(const std::string& a, const std::string& b) const;

    void validate() const;
    std::string to_json_text() const;
    static TagClusterModel from_json_text(std::string_view text);
    bool operator==(const TagClusterModel&) const = default;
};

TagClusterModel build_tag_cluster_model(const std::vector<std::string>& tags,
                                        const std::vector<std::vector<double>>& vectors,
                                        const ClusteringConfig& config);
TagClusterModel build_tag_cluster_model(const std::vector<std::string>& tags, const EmbeddingClient& embedder,
                                        const ClusteringConfig& config);

// Sorted, deduplicated tags over every annotated record.
std::vector<std::string> corpus_tags(const std::vector<CuratedRecord>& records);

struct ReasoningProfile {
    std::string record_id;
    std::vector<double> vector;

    bool operator==(const ReasoningProfile&) const = default;
};

ReasoningProfile reasoning_profile(const CuratedRecord& record, const TagClusterModel& model);

struct FpsOptions {
    Metric metric = Metric::Cosine;
    bool random_start = false;  // start from a seeded pick instead of the max-norm profile
    Execution exec = Execution::Parallel;
};

// Greedy max-min selection; returns ids in pick order. Ties go to the
// smallest id.
std::vector<std::string> farthest_point_sampling(const std::vector<ReasoningProfile>& profiles, std::size_t k,
                                                 std::uint64_t seed, const FpsOptions& options = {});

struct SubsetSpec {
    std::size_t target_size = 500000;
    SelectionStrategy strategy;
    bool diversity = true;
    std::uint64_t random_seed = 0;

    void validate() const;
};

struct SubsetResult {
    std::vector<CuratedRecord> accepted;  // sorted by id
    std::vector<CuratedRecord> rejected;  // sorted by id
    std::vector<std::string> pick_order;  // FPS order, or sorted ids otherwise
    std::vector<std::string> warnings;
    PipelineManifest manifest;
};

// Stage 2 then Stage 3. Records that are already Rejected pass into
// `rejected` untouched and are counted in neither input nor output.
SubsetResult build_subset(const std::vector<CuratedRecord>& records, const SubsetSpec& spec,
                          const TagClusterModel& model, Metric metric = Metric::Cosine);

// Stage 3 alone: Accepted for the chosen `target` records, NotSelected for the rest.
SubsetResult diversify(const std::vector<CuratedRecord>& records, std::size_t target, bool diversity,
                       const TagClusterModel& model, std::uint64_t seed, Metric metric = Metric::Cosine);

// Query tags match record tags in the same cluster. An empty include list
// keeps everything not excluded.
std::vector<CuratedRecord> filter_by_tags(const std::vector<CuratedRecord>& records,
                                          const std::vector<std::string>& include_tags,
                                          const std::vector<std::string>& exclude_tags,
                                          const TagClusterModel* model = nullptr);

}  // namespace cotc
