// cotc: chain-of-thought corpus curation pipeline.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cotc/jsonl.hpp"
#include "cotc/pipeline.hpp"

namespace {

using namespace cotc;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> concurrency;
    std::string mock_dir;
    CLI::Option* mock_opt = nullptr;
    bool wall_clock = false;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunConfig base_config(const Globals& g) {
    RunConfig c = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
    if (g.seed) c.random_seed = *g.seed;
    if (g.concurrency) c.concurrency = *g.concurrency;
    if (g.wall_clock) c.timestamp = utc_now();
    return c;
}

std::optional<fs::path> mock_of(const Globals& g) {
    if (!g.mock_opt || g.mock_opt->count() == 0) return std::nullopt;
    return fs::path(g.mock_dir);
}

void report(const PipelineManifest& m) {
    std::cout << m.stage << ": " << m.input_count << " in, " << m.output_count << " out";
    if (m.total_rejects() > 0) {
        std::cout << ", rejected";
        for (const auto& [code, n] : m.reject_counts) std::cout << ' ' << code << '=' << n;
    }
    std::cout << '\n';
    for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curate a chain-of-thought training corpus from a seed pool."};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "Run configuration (JSON)");
    app.add_option("--seed", g.seed, "Global random seed");
    app.add_option("--concurrency", g.concurrency, "Concurrent model requests");
    g.mock_opt = app.add_option("--mock", g.mock_dir, "Use the mock gateway, optionally loaded from a fixture dir")
                     ->expected(0, 1);
    app.add_flag("--wall-clock", g.wall_clock, "Stamp provenance with the current time");

    // sample
    auto* sample = app.add_subcommand("sample", "Stratified sampling of the seed pool");
    std::vector<std::string> sample_in;
    std::string sample_out, sample_format;
    std::optional<std::size_t> cap, target_total;
    sample->add_option("--in", sample_in, "Pool files (default: config input.paths)");
    sample->add_option("--format", sample_format, "Pool line format: canonical or qa");
    sample->add_option("--cap", cap, "Per-category cap");
    sample->add_option("--target-total", target_total, "Overall sample size");
    sample->add_option("--out", sample_out, "Sampled pool")->required();

    // distill
    auto* distill_cmd = app.add_subcommand("distill", "Generate teacher traces");
    std::string distill_in, distill_out;
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    distill_cmd->add_option("--in", distill_in)->required();
    distill_cmd->add_option("--out", distill_out)->required();
    distill_cmd->add_option("--temperature", temperature);
    distill_cmd->add_option("--max-tokens", max_tokens);
    distill_cmd->add_option("--concurrency", g.concurrency);

    // score
    auto* score = app.add_subcommand("score", "Joint difficulty/quality/tag annotation");
    std::string score_in, score_out;
    score->add_option("--in", score_in)->required();
    score->add_option("--out", score_out)->required();
    score->add_option("--concurrency", g.concurrency);

    // filter
    auto* filter = app.add_subcommand("filter", "Rule-based filtering");
    std::string filter_in, filter_out, filter_rejects, stage1_path;
    filter->add_option("--in", filter_in)->required();
    filter->add_option("--out", filter_out)->required();
    filter->add_option("--rejects", filter_rejects)->required();
    filter->add_option("--config", stage1_path, "Filter settings (JSON, same keys as the run config's stage1)");

    // select
    auto* select = app.add_subcommand("select", "Threshold or random selection");
    std::string select_in, select_out, select_rejects, strategy;
    select->add_option("--in", select_in)->required();
    select->add_option("--out", select_out)->required();
    select->add_option("--rejects", select_rejects, "Dropped records (default: <out>.rejects.jsonl)");
    select->add_option("--strategy", strategy, "random:N | quality[:Q] | difficulty[:D] | quality-and-difficulty[:Q,D]");

    // diversify
    auto* div = app.add_subcommand("diversify", "Tag-embedding diversity sampling");
    std::string div_in, div_out, div_rejects, div_clusters, metric;
    std::optional<std::size_t> target, min_pts;
    std::optional<double> eps;
    bool no_diversity = false;
    div->add_option("--in", div_in)->required();
    div->add_option("--out", div_out)->required();
    div->add_option("--rejects", div_rejects, "Unselected records (default: <out>.rejects.jsonl)");
    div->add_option("--clusters", div_clusters, "Tag cluster model output (default: <out>.clusters.json)");
    div->add_option("--target", target, "Subset size");
    div->add_option("--eps", eps, "DBSCAN radius");
    div->add_option("--min-pts", min_pts, "DBSCAN core threshold");
    div->add_option("--metric", metric, "cosine or euclidean");
    div->add_flag("--random", no_diversity, "Uniform random truncation instead of farthest-point sampling");
    div->add_option("--seed", g.seed);

    // tags
    auto* tags = app.add_subcommand("tags", "Filter records by cluster-expanded tags");
    std::string tags_in, tags_out, tags_model;
    std::vector<std::string> include, exclude;
    tags->add_option("--in", tags_in)->required();
    tags->add_option("--out", tags_out)->required();
    tags->add_option("--include", include)->delimiter(',');
    tags->add_option("--exclude", exclude)->delimiter(',');
    tags->add_option("--model", tags_model, "Tag cluster model from diversify (default: embed and cluster now)");

    // stats
    auto* stats = app.add_subcommand("stats", "Distribution and tag-frequency reports");
    std::string stats_in, stats_out, stats_md;
    std::vector<std::string> stats_manifests;
    std::optional<std::size_t> top_n;
    stats->add_option("--in", stats_in)->required();
    stats->add_option("--out", stats_out)->required();
    stats->add_option("--markdown", stats_md);
    stats->add_option("--top-n", top_n);
    stats->add_option("--manifest", stats_manifests, "Stage manifests to summarize");

    // run / resume
    auto* run = app.add_subcommand("run", "Run every stage");
    std::string work_dir;
    run->add_option("--work-dir", work_dir);
    auto* res = app.add_subcommand("resume", "Continue a run from a stage");
    std::string from_stage;
    res->add_option("--work-dir", work_dir);
    res->add_option("--from", from_stage)->required();

    // serve-mock
    auto* serve = app.add_subcommand("serve-mock", "Serve the mock gateway over HTTP");
    std::string fixtures;
    int port = 8000;
    serve->add_option("--fixtures", fixtures);
    serve->add_option("--port", port);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ErrorFamily::Usage);
    }

    try {
        RunConfig config = base_config(g);
        const auto mock = mock_of(g);
        const auto default_side = [](const std::string& out, const char* suffix) {
            return fs::path(out + suffix);
        };

        if (*serve) {
            auto server = serve_mock(fixtures, port);
            std::cout << "mock gateway listening on " << server->base_url() << std::endl;
            server->wait();
            return 0;
        }

        if (*sample) {
            if (cap) config.sampling.per_category_cap = *cap;
            if (target_total) config.sampling.target_total = *target_total;
            if (!sample_format.empty()) config.input_format = sample_format;
            if (!sample_in.empty()) config.inputs.assign(sample_in.begin(), sample_in.end());
        }
        if (*distill_cmd) {
            if (temperature) config.teacher.temperature = *temperature;
            if (max_tokens) config.teacher.max_output_tokens = *max_tokens;
        }
        if (*filter && !stage1_path.empty()) config.stage1 = load_stage1_config(stage1_path);
        if (*select && !strategy.empty()) config.subset.strategy = SelectionStrategy::parse(strategy);
        if (*div) {
            if (target) config.subset.target_size = *target;
            if (eps) config.clustering.eps = *eps;
            if (min_pts) config.clustering.min_pts = *min_pts;
            if (!metric.empty()) config.clustering.metric = parse_metric(metric);
            if (no_diversity) config.subset.diversity = false;
        }
        if (*stats && top_n) config.top_n = *top_n;
        if (!work_dir.empty()) config.work_dir = work_dir;
        config.validate();

        Gateways gw;
        const bool needs_gateway = *distill_cmd || *score || *run || *res || (*div && config.subset.diversity) ||
                                   (*tags && tags_model.empty());
        if (needs_gateway) gw = make_gateways(config, mock);
        const StageContext ctx{config, config.hash(), &gw};

        if (*sample) report(run_sample(ctx, config.inputs, sample_out));
        if (*distill_cmd) report(run_distill(ctx, distill_in, distill_out));
        if (*score) report(run_score(ctx, score_in, score_out));
        if (*filter) report(run_filter(ctx, filter_in, filter_out, filter_rejects));
        if (*select) {
            report(run_select(ctx, select_in, select_out,
                              select_rejects.empty() ? default_side(select_out, ".rejects.jsonl") : fs::path(select_rejects)));
        }
        if (*div) {
            report(run_diversify(ctx, div_in, div_out,
                                 div_rejects.empty() ? default_side(div_out, ".rejects.jsonl") : fs::path(div_rejects),
                                 div_clusters.empty() ? default_side(div_out, ".clusters.json") : fs::path(div_clusters)));
        }
        if (*tags) {
            auto records = read_records(tags_in);
            TagClusterModel model = tags_model.empty()
                                        ? build_tag_cluster_model(corpus_tags(records), *gw.embedder, config.clustering)
                                        : TagClusterModel::from_json_text(read_text(tags_model));
            const auto kept = filter_by_tags(records, include, exclude, &model);
            write_records_atomic(tags_out, kept);
            std::cout << "tags: " << records.size() << " in, " << kept.size() << " out\n";
        }
        if (*stats) {
            std::vector<fs::path> manifests(stats_manifests.begin(), stats_manifests.end());
            report(run_stats(ctx, stats_in, stats_out,
                             stats_md.empty() ? std::nullopt : std::optional<fs::path>(stats_md), manifests));
        }
        if (*run) {
            for (const auto& m : run_pipeline(config, gw)) report(m);
        }
        if (*res) {
            for (const auto& m : resume(config, gw, from_stage)) report(m);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.family());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return static_cast<int>(ErrorFamily::Internal);
    }
}
