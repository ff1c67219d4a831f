#include "cotc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

std::string_view to_string(Axis a) { return a == Axis::Difficulty ? "difficulty" : "quality"; }

std::int64_t percent_hundredths(std::size_t count, std::size_t total) {
    if (total == 0) throw InvariantError("total", "percentage of an empty corpus");
    const auto c = static_cast<unsigned __int128>(count);
    const auto t = static_cast<unsigned __int128>(total);
    return static_cast<std::int64_t>((2 * c * 10000 + t) / (2 * t));
}

std::string format_hundredths(std::int64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld", h < 0 ? "-" : "", static_cast<long long>(std::llabs(h) / 100),
                  static_cast<long long>(std::llabs(h) % 100));
    return buf;
}

DistributionReport compute_distribution(const std::vector<CuratedRecord>& records, Axis axis) {
    if (records.empty()) throw InvariantError("records", "distribution of an empty corpus is undefined");
    DistributionReport r;
    r.axis = axis;
    r.total = records.size();
    for (int level = 1; level <= 5; ++level) r.counts[level] = 0;
    for (const auto& rec : records) {
        if ((rec.status() != Status::Annotated && rec.status() != Status::Accepted) || !rec.annotation) {
            throw InvariantError("status", "record " + rec.id() + " is not annotated");
        }
        ++r.counts.at(axis == Axis::Difficulty ? rec.annotation->difficulty : rec.annotation->quality);
    }
    for (const auto& [level, c] : r.counts) r.percentages[level] = percent_hundredths(c, r.total);
    return r;
}

TagFrequencyReport compute_tag_frequency(const std::vector<CuratedRecord>& records, std::size_t top_n,
                                         const TagClusterModel* model) {
    if (top_n < 1) throw InvariantError("top_n", "must be positive");
    // Cluster label = smallest member tag.
    std::map<int, std::string> cluster_label;
    if (model) {
        for (const auto& [tag, c] : model->tag_to_cluster) {
            if (c != kNoise && !cluster_label.count(c)) cluster_label[c] = tag;  // map order = smallest tag first
        }
    }
    const auto label_of = [&](const std::string& tag) -> const std::string& {
        if (!model) return tag;
        const auto c = model->cluster_of(tag);
        if (!c || *c == kNoise) return tag;
        return cluster_label.at(*c);
    };

    std::map<std::string, std::size_t> counts;
    for (const auto& rec : records) {
        if (!rec.annotation) continue;
        std::vector<std::string> labels;
        for (const auto& t : rec.annotation->tags) labels.push_back(label_of(t));
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        for (auto& l : labels) ++counts[l];
    }

    TagFrequencyReport r;
    r.top_n = top_n;
    r.corpus_size = records.size();
    for (const auto& [label, c] : counts) {
        r.entries.push_back({label, c, static_cast<double>(c) / static_cast<double>(records.size())});
    }
    std::stable_sort(r.entries.begin(), r.entries.end(),
                     [](const TagFrequency& a, const TagFrequency& b) { return a.count > b.count; });
    if (r.entries.size() > top_n) r.entries.resize(top_n);
    return r;
}

StatsBundle compute_stats(const std::vector<CuratedRecord>& records, std::size_t top_n,
                          const TagClusterModel* model) {
    return {compute_distribution(records, Axis::Difficulty), compute_distribution(records, Axis::Quality),
            compute_tag_frequency(records, top_n, model), {}};
}

namespace {

json distribution_json(const DistributionReport& r) {
    json counts = json::object();
    json pct = json::object();
    for (const auto& [level, c] : r.counts) counts[std::to_string(level)] = c;
    for (const auto& [level, h] : r.percentages) pct[std::to_string(level)] = h;
    return {{"axis", std::string(to_string(r.axis))}, {"total", r.total}, {"counts", counts},
            {"percent_hundredths", pct}};
}

DistributionReport distribution_from(const json& j) {
    DistributionReport r;
    const auto axis = j.at("axis").get<std::string>();
    if (axis != "difficulty" && axis != "quality") throw DecodeError("axis", "unknown axis " + axis);
    r.axis = axis == "difficulty" ? Axis::Difficulty : Axis::Quality;
    r.total = j.at("total").get<std::size_t>();
    for (const auto& [k, v] : j.at("counts").items()) r.counts[std::stoi(k)] = v.get<std::size_t>();
    for (const auto& [k, v] : j.at("percent_hundredths").items()) r.percentages[std::stoi(k)] = v.get<std::int64_t>();
    return r;
}

void markdown_distribution(std::string& md, const DistributionReport& r) {
    md += "## ";
    md += r.axis == Axis::Difficulty ? "Difficulty" : "Quality";
    md += "\n\n| Level | Count | Percent |\n|---:|---:|---:|\n";
    for (const auto& [level, c] : r.counts) {
        md += "| " + std::to_string(level) + " | " + std::to_string(c) + " | " +
              format_hundredths(r.percentages.at(level)) + " |\n";
    }
    md += "\n";
}

}  // namespace

std::string render_report(const StatsBundle& reports, ReportFormat format) {
    if (format == ReportFormat::Structured) {
        json tags = json::array();
        for (const auto& e : reports.tags.entries) {
            tags.push_back({{"label", e.label}, {"count", e.count}, {"fraction", e.fraction}});
        }
        json manifests = json::array();
        for (const auto& m : reports.manifests) manifests.push_back(json::parse(m.to_json_text()));
        const json j = {
            {"difficulty", distribution_json(reports.difficulty)},
            {"quality", distribution_json(reports.quality)},
            {"tags", {{"top_n", reports.tags.top_n}, {"corpus_size", reports.tags.corpus_size}, {"entries", tags}}},
            {"manifests", manifests},
        };
        return j.dump(2) + "\n";
    }

    std::string md = "# Corpus statistics\n\n";
    md += "Records: " + std::to_string(reports.difficulty.total) + "\n\n";
    markdown_distribution(md, reports.difficulty);
    markdown_distribution(md, reports.quality);
    md += "## Tags (top " + std::to_string(reports.tags.top_n) + ")\n\n| Tag | Records | Percent |\n|---|---:|---:|\n";
    for (const auto& e : reports.tags.entries) {
        md += "| " + e.label + " | " + std::to_string(e.count) + " | " +
              format_hundredths(percent_hundredths(e.count, std::max<std::size_t>(1, reports.tags.corpus_size))) +
              " |\n";
    }
    if (!reports.manifests.empty()) {
        md += "\n## Stages\n\n| Stage | Input | Output | Rejected | Config |\n|---|---:|---:|---:|---|\n";
        for (const auto& m : reports.manifests) {
            md += "| " + m.stage + " | " + std::to_string(m.input_count) + " | " + std::to_string(m.output_count) +
                  " | " + std::to_string(m.total_rejects()) + " | " + m.config_hash.substr(0, 12) + " |\n";
        }
    }
    return md;
}

StatsBundle decode_report(std::string_view structured) {
    StatsBundle b;
    try {
        const json j = json::parse(structured);
        b.difficulty = distribution_from(j.at("difficulty"));
        b.quality = distribution_from(j.at("quality"));
        const auto& t = j.at("tags");
        b.tags.top_n = t.at("top_n").get<std::size_t>();
        b.tags.corpus_size = t.at("corpus_size").get<std::size_t>();
        for (const auto& e : t.at("entries")) {
            b.tags.entries.push_back(
                {e.at("label").get<std::string>(), e.at("count").get<std::size_t>(), e.at("fraction").get<double>()});
        }
        for (const auto& m : j.at("manifests")) b.manifests.push_back(PipelineManifest::from_json_text(m.dump()));
    } catch (const json::exception& e) {
        throw DecodeError("report", e.what());
    } catch (const std::logic_error& e) {
        throw DecodeError("report", e.what());
    }
    return b;
}

}  // namespace cotc
