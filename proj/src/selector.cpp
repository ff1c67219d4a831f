#include "cotc/selector.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "cotc/hash.hpp"
#include "cotc/random.hpp"
#include "cotc/text.hpp"
#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

namespace {

int parse_level(std::string_view s, const char* what) {
    int v = 0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw Error(ErrorFamily::Usage, std::string("bad ") + what + ": " + std::string(s));
    return v;
}

void require_annotated(const CuratedRecord& r) {
    if ((r.status() != Status::Annotated && r.status() != Status::Accepted) || !r.annotation) {
        throw InvariantError("status", "record " + r.id() + " is " + std::string(to_string(r.status())) +
                                           ", expected annotated");
    }
}

std::vector<const CuratedRecord*> sorted_by_id(const std::vector<CuratedRecord>& records) {
    std::vector<const CuratedRecord*> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(&r);
    std::sort(v.begin(), v.end(), [](const auto* a, const auto* b) { return a->id() < b->id(); });
    return v;
}

}  // namespace

SelectionStrategy SelectionStrategy::random(std::size_t n) {
    SelectionStrategy s;
    s.kind = StrategyKind::Random;
    s.n = n;
    return s;
}

SelectionStrategy SelectionStrategy::quality_only(int min_q) {
    SelectionStrategy s;
    s.kind = StrategyKind::QualityOnly;
    s.min_quality = min_q;
    return s;
}

SelectionStrategy SelectionStrategy::difficulty_only(int min_d) {
    SelectionStrategy s;
    s.kind = StrategyKind::DifficultyOnly;
    s.min_difficulty = min_d;
    return s;
}

SelectionStrategy SelectionStrategy::quality_and_difficulty(int min_q, int min_d) {
    SelectionStrategy s;
    s.kind = StrategyKind::QualityAndDifficulty;
    s.min_quality = min_q;
    s.min_difficulty = min_d;
    return s;
}

SelectionStrategy SelectionStrategy::parse(std::string_view text) {
    const auto colon = text.find(':');
    const auto name = text.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    SelectionStrategy s;
    if (name == "random") {
        if (arg.empty()) throw Error(ErrorFamily::Usage, "random strategy needs a count: random:N");
        std::size_t n = 0;
        const auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), n);
        if (ec != std::errc() || p != arg.data() + arg.size()) {
            throw Error(ErrorFamily::Usage, "bad random count: " + std::string(arg));
        }
        s = random(n);
    } else if (name == "quality") {
        s = quality_only(arg.empty() ? 5 : parse_level(arg, "quality threshold"));
    } else if (name == "difficulty") {
        s = difficulty_only(arg.empty() ? 4 : parse_level(arg, "difficulty threshold"));
    } else if (name == "quality-and-difficulty") {
        s = quality_and_difficulty();
        if (!arg.empty()) {
            const auto comma = arg.find(',');
            if (comma == std::string_view::npos) throw Error(ErrorFamily::Usage, "expected quality-and-difficulty:Q,D");
            s.min_quality = parse_level(arg.substr(0, comma), "quality threshold");
            s.min_difficulty = parse_level(arg.substr(comma + 1), "difficulty threshold");
        }
    } else {
        throw Error(ErrorFamily::Usage, "unknown strategy: " + std::string(text));
    }
    s.validate();
    return s;
}

std::string SelectionStrategy::to_string() const {
    switch (kind) {
        case StrategyKind::Random: return "random:" + std::to_string(n);
        case StrategyKind::QualityOnly: return "quality:" + std::to_string(min_quality);
        case StrategyKind::DifficultyOnly: return "difficulty:" + std::to_string(min_difficulty);
        case StrategyKind::QualityAndDifficulty:
            return "quality-and-difficulty:" + std::to_string(min_quality) + "," + std::to_string(min_difficulty);
    }
    return {};
}

void SelectionStrategy::validate() const {
    if (kind == StrategyKind::QualityOnly || kind == StrategyKind::QualityAndDifficulty) {
        if (min_quality < 1 || min_quality > 5) throw InvariantError("min_quality", "must be within [1,5]");
    }
    if (kind == StrategyKind::DifficultyOnly || kind == StrategyKind::QualityAndDifficulty) {
        if (min_difficulty < 1 || min_difficulty > 5) throw InvariantError("min_difficulty", "must be within [1,5]");
    }
}

bool SelectionStrategy::admits(const Annotation& a) const {
    switch (kind) {
        case StrategyKind::Random: return true;
        case StrategyKind::QualityOnly: return a.quality >= min_quality;
        case StrategyKind::DifficultyOnly: return a.difficulty >= min_difficulty;
        case StrategyKind::QualityAndDifficulty: return a.quality >= min_quality && a.difficulty >= min_difficulty;
    }
    return false;
}

StrategySplit split_by_strategy(const std::vector<CuratedRecord>& records, const SelectionStrategy& strategy,
                                std::uint64_t seed) {
    strategy.validate();
    for (const auto& r : records) require_annotated(r);
    const auto order = sorted_by_id(records);
    StrategySplit out;

    if (strategy.kind == StrategyKind::Random) {
        if (strategy.n > records.size()) {
            throw InvariantError("n", "random strategy asks for " + std::to_string(strategy.n) + " of " +
                                          std::to_string(records.size()) + " records");
        }
        Rng rng(seed);
        std::vector<char> chosen(order.size(), 0);
        for (std::size_t i : sample_indices(order.size(), strategy.n, rng)) chosen[i] = 1;
        for (std::size_t i = 0; i < order.size(); ++i) {
            CuratedRecord r = *order[i];
            if (chosen[i]) {
                out.kept.push_back(std::move(r));
            } else {
                r.reject(RejectCode::NotSelected, "random sample");
                out.dropped.push_back(std::move(r));
            }
        }
        return out;
    }

    const bool checks_difficulty =
        strategy.kind == StrategyKind::DifficultyOnly || strategy.kind == StrategyKind::QualityAndDifficulty;
    for (const auto* p : order) {
        CuratedRecord r = *p;
        const auto& a = *r.annotation;
        if (strategy.admits(a)) {
            out.kept.push_back(std::move(r));
        } else if (checks_difficulty && a.difficulty < strategy.min_difficulty) {
            r.reject(RejectCode::LowDifficulty, "difficulty " + std::to_string(a.difficulty) + " < " +
                                                   std::to_string(strategy.min_difficulty));
            out.dropped.push_back(std::move(r));
        } else {
            r.reject(RejectCode::NotSelected, "quality " + std::to_string(a.quality) + " < " +
                                                 std::to_string(strategy.min_quality));
            out.dropped.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<CuratedRecord> select_by_strategy(const std::vector<CuratedRecord>& records,
                                              const SelectionStrategy& strategy, std::uint64_t seed) {
    return split_by_strategy(records, strategy, seed).kept;
}

void ClusteringConfig::validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InvariantError("eps", "must be positive");
    if (min_pts < 1) throw InvariantError("min_pts", "must be at least 1");
}

std::string_view to_string(Metric m) { return m == Metric::Cosine ? "cosine" : "euclidean"; }

Metric parse_metric(std::string_view s) {
    if (s == "cosine") return Metric::Cosine;
    if (s == "euclidean") return Metric::Euclidean;
    throw InvariantError("metric", "unknown metric '" + std::string(s) + "'");
}

std::vector<int> dbscan(const std::vector<std::vector<double>>& points, const ClusteringConfig& config,
                        Execution exec) {
    config.validate();
    const PointMatrix m(points);
    const auto nbrs = neighbor_lists(m, config.eps, config.metric, exec);
    constexpr int kUnvisited = -2;
    std::vector<int> labels(points.size(), kUnvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (labels[i] != kUnvisited) continue;
        if (nbrs[i].size() < config.min_pts) {
            labels[i] = kNoise;
            continue;
        }
        labels[i] = cluster;
        std::deque<std::size_t> frontier(nbrs[i].begin(), nbrs[i].end());
        while (!frontier.empty()) {
            const std::size_t q = frontier.front();
            frontier.pop_front();
            if (labels[q] == kNoise) labels[q] = cluster;  // border point
            if (labels[q] != kUnvisited) continue;
            labels[q] = cluster;
            if (nbrs[q].size() >= config.min_pts) frontier.insert(frontier.end(), nbrs[q].begin(), nbrs[q].end());
        }
        ++cluster;
    }
    return labels;
}

const std::vector<double>& TagClusterModel::effective_vector(const std::string& tag) const {
    const auto it = tag_to_cluster.find(tag);
    if (it == tag_to_cluster.end()) throw InvariantError("tags", "tag '" + tag + "' is not in the cluster model");
    if (it->second != kNoise) return cluster_centroids.at(it->second);
    return tag_vectors.at(tag);
}

std::optional<int> TagClusterModel::cluster_of(const std::string& tag) const {
    const auto it = tag_to_cluster.find(tag);
    if (it == tag_to_cluster.end()) return std::nullopt;
    return it->second;
}

bool TagClusterModel::same_cluster(const std::string& a, const std::string& b) const {
    if (a == b) return true;
    const auto ca = cluster_of(a);
    const auto cb = cluster_of(b);
    return ca && cb && *ca != kNoise && *ca == *cb;
}

void TagClusterModel::validate() const {
    for (const auto& [tag, c] : tag_to_cluster) {
        const auto v = tag_vectors.find(tag);
        if (v == tag_vectors.end()) throw InvariantError("tag_vectors", "missing vector for '" + tag + "'");
        if (v->second.size() != embedding_dim) throw InvariantError("tag_vectors", "dimension mismatch for '" + tag + "'");
        if (c != kNoise && !cluster_centroids.count(c)) {
            throw InvariantError("cluster_centroids", "cluster " + std::to_string(c) + " has no centroid");
        }
    }
    for (const auto& [c, v] : cluster_centroids) {
        if (v.size() != embedding_dim) throw InvariantError("cluster_centroids", "dimension mismatch");
    }
}

std::string TagClusterModel::to_json_text() const {
    json centroids = json::object();
    for (const auto& [c, v] : cluster_centroids) centroids[std::to_string(c)] = v;
    json j = {
        {"embedding_dim", embedding_dim},
        {"tag_to_cluster", tag_to_cluster},
        {"cluster_centroids", centroids},
        {"tag_vectors", tag_vectors},
    };
    return j.dump(2) + "\n";
}

TagClusterModel TagClusterModel::from_json_text(std::string_view text) {
    TagClusterModel m;
    try {
        const json j = json::parse(text);
        m.embedding_dim = j.at("embedding_dim").get<std::size_t>();
        m.tag_to_cluster = j.at("tag_to_cluster").get<std::map<std::string, int>>();
        for (const auto& [k, v] : j.at("cluster_centroids").items()) {
            m.cluster_centroids[std::stoi(k)] = v.get<std::vector<double>>();
        }
        m.tag_vectors = j.at("tag_vectors").get<std::map<std::string, std::vector<double>>>();
    } catch (const json::exception& e) {
        throw DecodeError("tag_clusters", e.what());
    } catch (const std::logic_error& e) {
        throw DecodeError("cluster_centroids", e.what());
    }
    m.validate();
    return m;
}

TagClusterModel build_tag_cluster_model(const std::vector<std::string>& tags,
                                        const std::vector<std::vector<double>>& vectors,
                                        const ClusteringConfig& config) {
    if (tags.size() != vectors.size()) throw InvariantError("vectors", "one vector per tag expected");
    if (std::set<std::string>(tags.begin(), tags.end()).size() != tags.size()) {
        throw InvariantError("tags", "tags must be deduplicated");
    }
    TagClusterModel m;
    m.embedding_dim = vectors.empty() ? 0 : vectors.front().size();
    const auto labels = dbscan(vectors, config);

    std::map<int, std::size_t> members;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        m.tag_to_cluster[tags[i]] = labels[i];
        m.tag_vectors[tags[i]] = vectors[i];
        if (labels[i] == kNoise) continue;
        auto& c = m.cluster_centroids[labels[i]];
        if (c.empty()) c.assign(m.embedding_dim, 0.0);
        for (std::size_t k = 0; k < m.embedding_dim; ++k) c[k] += vectors[i][k];
        ++members[labels[i]];
    }
    for (auto& [c, v] : m.cluster_centroids) {
        const auto n = static_cast<double>(members[c]);
        for (double& x : v) x /= n;
    }
    return m;
}

TagClusterModel build_tag_cluster_model(const std::vector<std::string>& tags, const EmbeddingClient& embedder,
                                        const ClusteringConfig& config) {
    if (tags.empty()) return build_tag_cluster_model(tags, std::vector<std::vector<double>>{}, config);
    const auto batch = embedder.embed(tags);
    return build_tag_cluster_model(tags, batch.vectors, config);
}

std::vector<std::string> corpus_tags(const std::vector<CuratedRecord>& records) {
    std::set<std::string> all;
    for (const auto& r : records) {
        if (r.annotation) all.insert(r.annotation->tags.begin(), r.annotation->tags.end());
    }
    return {all.begin(), all.end()};
}

ReasoningProfile reasoning_profile(const CuratedRecord& record, const TagClusterModel& model) {
    require_annotated(record);
    const auto& tags = record.annotation->tags;
    if (tags.empty()) throw InvariantError("tags", "record " + record.id() + " has no tags");
    ReasoningProfile p{record.id(), std::vector<double>(model.embedding_dim, 0.0)};
    for (const auto& t : tags) {
        const auto& v = model.effective_vector(t);
        for (std::size_t k = 0; k < v.size(); ++k) p.vector[k] += v[k];
    }
    const auto n = static_cast<double>(tags.size());
    for (double& x : p.vector) x /= n;
    return p;
}

std::vector<std::string> farthest_point_sampling(const std::vector<ReasoningProfile>& profiles, std::size_t k,
                                                 std::uint64_t seed, const FpsOptions& options) {
    if (k == 0) throw InvariantError("k", "must be positive");
    if (k > profiles.size()) {
        throw InvariantError("k", std::to_string(k) + " exceeds " + std::to_string(profiles.size()) + " profiles");
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(profiles.size());
    for (const auto& p : profiles) rows.push_back(p.vector);
    const PointMatrix m(rows);

    // tie_rank[i] = position of profile i in id order.
    std::vector<std::size_t> by_id(profiles.size());
    for (std::size_t i = 0; i < by_id.size(); ++i) by_id[i] = i;
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return profiles[a].record_id < profiles[b].record_id; });
    std::vector<std::size_t> tie_rank(profiles.size());
    for (std::size_t r = 0; r < by_id.size(); ++r) {
        if (r > 0 && profiles[by_id[r]].record_id == profiles[by_id[r - 1]].record_id) {
            throw InvariantError("record_id", "duplicate profile id " + profiles[by_id[r]].record_id);
        }
        tie_rank[by_id[r]] = r;
    }

    std::size_t start = by_id.front();
    if (options.random_start) {
        Rng rng(seed);
        start = by_id[static_cast<std::size_t>(uniform_below(rng, by_id.size()))];
    } else {
        for (std::size_t r = 1; r < by_id.size(); ++r) {
            if (m.norm(by_id[r]) > m.norm(start)) start = by_id[r];
        }
    }

    std::vector<double> min_dist(profiles.size(), std::numeric_limits<double>::infinity());
    std::vector<char> selected(profiles.size(), 0);
    std::vector<std::string> picks;
    picks.reserve(k);
    std::size_t pick = start;
    for (;;) {
        selected[pick] = 1;
        picks.push_back(profiles[pick].record_id);
        if (picks.size() == k) break;
        update_min_distance(m, pick, min_dist, options.metric, options.exec);
        pick = argmax_unselected(min_dist, selected, tie_rank, options.exec);
    }
    return picks;
}

void SubsetSpec::validate() const {
    if (target_size < 1) throw InvariantError("target_size", "must be at least 1");
    strategy.validate();
}

SubsetResult diversify(const std::vector<CuratedRecord>& records, std::size_t target, bool diversity,
                       const TagClusterModel& model, std::uint64_t seed, Metric metric) {
    if (target < 1) throw InvariantError("target_size", "must be at least 1");
    SubsetResult out;
    out.manifest.stage = "diversify";
    out.manifest.random_seed = seed;

    std::vector<CuratedRecord> pool;
    for (const auto* r : sorted_by_id(records)) {
        if (r->rejected()) {
            out.rejected.push_back(*r);
        } else {
            require_annotated(*r);
            pool.push_back(*r);
        }
    }
    out.manifest.input_count = pool.size();

    std::vector<char> chosen(pool.size(), 1);
    if (pool.size() > target) {
        std::fill(chosen.begin(), chosen.end(), 0);
        if (diversity) {
            std::vector<ReasoningProfile> profiles;
            profiles.reserve(pool.size());
            for (const auto& r : pool) profiles.push_back(reasoning_profile(r, model));
            out.pick_order = farthest_point_sampling(profiles, target, seed, FpsOptions{metric, false, Execution::Parallel});
            std::set<std::string> ids(out.pick_order.begin(), out.pick_order.end());
            for (std::size_t i = 0; i < pool.size(); ++i) chosen[i] = ids.count(pool[i].id()) ? 1 : 0;
        } else {
            Rng rng(seed);
            for (std::size_t i : sample_indices(pool.size(), target, rng)) chosen[i] = 1;
        }
    } else if (pool.size() < target) {
        out.warnings.push_back("only " + std::to_string(pool.size()) + " records available for target " +
                               std::to_string(target));
    }

    const char* why = diversity ? "not chosen by farthest-point sampling" : "not in random truncation";
    for (std::size_t i = 0; i < pool.size(); ++i) {
        CuratedRecord r = std::move(pool[i]);
        if (chosen[i]) {
            r.advance(Status::Accepted);
            out.accepted.push_back(std::move(r));
        } else {
            r.reject(RejectCode::NotSelected, why);
            out.manifest.tally(RejectCode::NotSelected);
            out.rejected.push_back(std::move(r));
        }
    }
    if (out.pick_order.empty()) {
        for (const auto& r : out.accepted) out.pick_order.push_back(r.id());
    }
    std::sort(out.rejected.begin(), out.rejected.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
    out.manifest.output_count = out.accepted.size();
    out.manifest.warnings = out.warnings;
    return out;
}

SubsetResult build_subset(const std::vector<CuratedRecord>& records, const SubsetSpec& spec,
                          const TagClusterModel& model, Metric metric) {
    spec.validate();
    std::vector<CuratedRecord> upstream_rejected;
    std::vector<CuratedRecord> eligible;
    for (const auto& r : records) (r.rejected() ? upstream_rejected : eligible).push_back(r);

    auto split = split_by_strategy(eligible, spec.strategy, derive_seed(spec.random_seed, "strategy"));
    auto out = diversify(split.kept, spec.target_size, spec.diversity, model, derive_seed(spec.random_seed, "subset"),
                         metric);
    out.manifest.stage = "subset";
    out.manifest.random_seed = spec.random_seed;
    out.manifest.input_count = eligible.size();
    for (auto& r : split.dropped) {
        out.manifest.tally(r.reject_reason()->code);
        out.rejected.push_back(std::move(r));
    }
    for (auto& r : upstream_rejected) out.rejected.push_back(std::move(r));
    std::sort(out.rejected.begin(), out.rejected.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
    return out;
}

std::vector<CuratedRecord> filter_by_tags(const std::vector<CuratedRecord>& records,
                                          const std::vector<std::string>& include_tags,
                                          const std::vector<std::string>& exclude_tags,
                                          const TagClusterModel* model) {
    const auto include = normalize_tags(include_tags);
    const auto exclude = normalize_tags(exclude_tags);
    const auto matches = [&](const std::string& record_tag, const std::vector<std::string>& query) {
        for (const auto& q : query) {
            if (record_tag == q || (model && model->same_cluster(record_tag, q))) return true;
        }
        return false;
    };
    std::vector<CuratedRecord> out;
    for (const auto& r : records) {
        const auto& tags = r.annotation ? r.annotation->tags : std::vector<std::string>{};
        bool any_include = include.empty();
        bool any_exclude = false;
        for (const auto& t : tags) {
            any_include = any_include || matches(t, include);
            any_exclude = any_exclude || matches(t, exclude);
        }
        if (any_include && !any_exclude) out.push_back(r);
    }
    return out;
}

}  // namespace cotc
