#include "cotc/pipeline.hpp"

#include <cstdlib>
#include <exception>
#include <initializer_list>
#include <set>

#include "cotc/hash.hpp"
#include "cotc/jsonl.hpp"
#include "cotc/parallel.hpp"
#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorFamily::Usage, "config: " + what); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!j.is_object()) config_error(section + " must be an object");
    for (const auto& [k, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) config_error("unknown key '" + (section.empty() ? k : section + "." + k) + "'");
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& dst, const std::string& section) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception& e) {
        config_error(section + "." + key + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

Stage1Config stage1_from(const json& j, const fs::path& base) {
    check_keys(j,
               {"min_tokens", "max_tokens", "repetition_ngram", "repetition_max_ratio", "repetition_min_ngrams",
                "placeholder_lexicon", "placeholder_lexicon_file", "instability_lexicon", "instability_lexicon_file"},
               "stage1");
    Stage1Config c;
    read_opt(j, "min_tokens", c.min_tokens, "stage1");
    read_opt(j, "max_tokens", c.max_tokens, "stage1");
    read_opt(j, "repetition_ngram", c.repetition_ngram, "stage1");
    read_opt(j, "repetition_max_ratio", c.repetition_max_ratio, "stage1");
    read_opt(j, "repetition_min_ngrams", c.repetition_min_ngrams, "stage1");
    read_opt(j, "placeholder_lexicon", c.placeholder_lexicon, "stage1");
    read_opt(j, "instability_lexicon", c.instability_lexicon, "stage1");
    std::string placeholder_file;
    std::string instability_file;
    read_opt(j, "placeholder_lexicon_file", placeholder_file, "stage1");
    read_opt(j, "instability_lexicon_file", instability_file, "stage1");
    if (!placeholder_file.empty()) c.placeholder_lexicon = load_lexicon(resolve(base, placeholder_file));
    if (!instability_file.empty()) c.instability_lexicon = load_lexicon(resolve(base, instability_file));
    return c;
}

json parse_document(std::string_view text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        config_error(what + ": " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    if (concurrency < 1) throw InvariantError("concurrency", "must be at least 1");
    if (top_n < 1) throw InvariantError("top_n", "must be at least 1");
    if (!has_adapter(input_format)) throw InvariantError("input.format", "unknown format '" + input_format + "'");
    retry.validate();
    if (teacher.temperature < 0 || teacher.temperature > 2) throw InvariantError("teacher.temperature", "must be in [0,2]");
    if (teacher.max_output_tokens < 1) throw InvariantError("teacher.max_output_tokens", "must be positive");
    if (scorer.temperature < 0 || scorer.temperature > 2) throw InvariantError("scorer.temperature", "must be in [0,2]");
    if (scorer.max_output_tokens < 1) throw InvariantError("scorer.max_output_tokens", "must be positive");
    sampling.validate();
    stage1.validate();
    clustering.validate();
    subset.validate();
}

RunConfig RunConfig::from_json_text(std::string_view text, const fs::path& base_dir) {
    const json j = parse_document(text, "run config");
    check_keys(j,
               {"work_dir", "random_seed", "concurrency", "timestamp", "input", "endpoints", "api_key_env",
                "embedding_model", "retry", "teacher", "scorer", "sampling", "stage1", "clustering", "subset", "stats"},
               "");
    RunConfig c;
    std::string s;
    read_opt(j, "work_dir", s, "");
    if (!s.empty()) c.work_dir = resolve(base_dir, s);
    else c.work_dir = resolve(base_dir, c.work_dir);
    read_opt(j, "random_seed", c.random_seed, "");
    read_opt(j, "concurrency", c.concurrency, "");
    read_opt(j, "timestamp", c.timestamp, "");
    read_opt(j, "api_key_env", c.api_key_env, "");
    read_opt(j, "embedding_model", c.embedding_model, "");

    if (const auto it = j.find("input"); it != j.end()) {
        check_keys(*it, {"paths", "format"}, "input");
        std::vector<std::string> paths;
        read_opt(*it, "paths", paths, "input");
        for (const auto& p : paths) c.inputs.push_back(resolve(base_dir, p));
        read_opt(*it, "format", c.input_format, "input");
    }
    if (const auto it = j.find("endpoints"); it != j.end()) {
        check_keys(*it, {"teacher", "scorer", "embedder"}, "endpoints");
        read_opt(*it, "teacher", c.endpoints.teacher, "endpoints");
        read_opt(*it, "scorer", c.endpoints.scorer, "endpoints");
        read_opt(*it, "embedder", c.endpoints.embedder, "endpoints");
    }
    if (const auto it = j.find("retry"); it != j.end()) {
        check_keys(*it, {"max_attempts", "base_backoff_ms", "jitter_fraction"}, "retry");
        read_opt(*it, "max_attempts", c.retry.max_attempts, "retry");
        std::int64_t ms = c.retry.base_backoff.count();
        read_opt(*it, "base_backoff_ms", ms, "retry");
        c.retry.base_backoff = std::chrono::milliseconds(ms);
        read_opt(*it, "jitter_fraction", c.retry.jitter_fraction, "retry");
    }
    if (const auto it = j.find("teacher"); it != j.end()) {
        check_keys(*it, {"model", "temperature", "max_output_tokens", "system_prompt"}, "teacher");
        read_opt(*it, "model", c.teacher.model_name, "teacher");
        read_opt(*it, "temperature", c.teacher.temperature, "teacher");
        read_opt(*it, "max_output_tokens", c.teacher.max_output_tokens, "teacher");
        read_opt(*it, "system_prompt", c.teacher.system_prompt, "teacher");
    }
    if (const auto it = j.find("scorer"); it != j.end()) {
        check_keys(*it, {"model", "temperature", "max_output_tokens", "rubric_prompt"}, "scorer");
        read_opt(*it, "model", c.scorer.model_name, "scorer");
        read_opt(*it, "temperature", c.scorer.temperature, "scorer");
        read_opt(*it, "max_output_tokens", c.scorer.max_output_tokens, "scorer");
        read_opt(*it, "rubric_prompt", c.scorer.rubric_prompt, "scorer");
    }
    if (const auto it = j.find("sampling"); it != j.end()) {
        check_keys(*it, {"per_category_cap", "target_total"}, "sampling");
        read_opt(*it, "per_category_cap", c.sampling.per_category_cap, "sampling");
        if (it->contains("target_total") && !it->at("target_total").is_null()) {
            std::size_t t = 0;
            read_opt(*it, "target_total", t, "sampling");
            c.sampling.target_total = t;
        }
    }
    if (const auto it = j.find("stage1"); it != j.end()) c.stage1 = stage1_from(*it, base_dir);
    if (const auto it = j.find("clustering"); it != j.end()) {
        check_keys(*it, {"eps", "min_pts", "metric"}, "clustering");
        read_opt(*it, "eps", c.clustering.eps, "clustering");
        read_opt(*it, "min_pts", c.clustering.min_pts, "clustering");
        std::string metric;
        read_opt(*it, "metric", metric, "clustering");
        if (!metric.empty()) c.clustering.metric = parse_metric(metric);
    }
    if (const auto it = j.find("subset"); it != j.end()) {
        check_keys(*it, {"target_size", "strategy", "diversity"}, "subset");
        read_opt(*it, "target_size", c.subset.target_size, "subset");
        std::string strategy;
        read_opt(*it, "strategy", strategy, "subset");
        if (!strategy.empty()) c.subset.strategy = SelectionStrategy::parse(strategy);
        read_opt(*it, "diversity", c.subset.diversity, "subset");
    }
    if (const auto it = j.find("stats"); it != j.end()) {
        check_keys(*it, {"top_n"}, "stats");
        read_opt(*it, "top_n", c.top_n, "stats");
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    return from_json_text(read_text(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

Stage1Config load_stage1_config(const fs::path& path) {
    const json j = parse_document(read_text(path), path.string());
    auto c = stage1_from(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
    c.validate();
    return c;
}

std::string RunConfig::canonical_json() const {
    json j = {
        {"random_seed", random_seed},
        {"input_format", input_format},
        {"embedding_model", embedding_model},
        {"retry",
         {{"max_attempts", retry.max_attempts},
          {"base_backoff_ms", retry.base_backoff.count()},
          {"jitter_fraction", retry.jitter_fraction}}},
        {"teacher",
         {{"model", teacher.model_name},
          {"temperature", teacher.temperature},
          {"max_output_tokens", teacher.max_output_tokens},
          {"system_prompt", teacher.system_prompt}}},
        {"scorer",
         {{"model", scorer.model_name},
          {"temperature", scorer.temperature},
          {"max_output_tokens", scorer.max_output_tokens},
          {"rubric_prompt", scorer.rubric_prompt}}},
        {"sampling",
         {{"per_category_cap", sampling.per_category_cap},
          {"target_total", sampling.target_total ? json(*sampling.target_total) : json(nullptr)}}},
        {"stage1",
         {{"min_tokens", stage1.min_tokens},
          {"max_tokens", stage1.max_tokens},
          {"repetition_ngram", stage1.repetition_ngram},
          {"repetition_max_ratio", stage1.repetition_max_ratio},
          {"repetition_min_ngrams", stage1.repetition_min_ngrams},
          {"placeholder_lexicon", stage1.placeholder_lexicon},
          {"instability_lexicon", stage1.instability_lexicon}}},
        {"clustering",
         {{"eps", clustering.eps},
          {"min_pts", clustering.min_pts},
          {"metric", std::string(to_string(clustering.metric))}}},
        {"subset",
         {{"target_size", subset.target_size},
          {"strategy", subset.strategy.to_string()},
          {"diversity", subset.diversity}}},
        {"stats", {{"top_n", top_n}}},
    };
    return j.dump();
}

std::string RunConfig::hash() const { return sha256_hex(canonical_json()); }

std::uint64_t RunConfig::stage_seed(std::string_view stage) const { return derive_seed(random_seed, stage); }

Gateways make_gateways(const RunConfig& config, std::shared_ptr<Transport> transport, Sleeper sleeper) {
    Gateways g;
    g.teacher = std::make_shared<ChatClient>(transport, config.retry, sleeper);
    g.scorer = std::make_shared<ChatClient>(transport, config.retry, sleeper);
    g.embedder = std::make_shared<EmbeddingClient>(transport, config.embedding_model, config.retry, 256, sleeper);
    return g;
}

Gateways make_gateways(const RunConfig& config, const std::optional<fs::path>& mock) {
    if (mock) {
        std::shared_ptr<MockEndpoint> endpoint =
            mock->empty() ? std::make_shared<MockEndpoint>() : MockEndpoint::load(*mock);
        return make_gateways(config, std::make_shared<InProcessTransport>(endpoint));
    }
    const char* key = std::getenv(config.api_key_env.c_str());
    const std::string api_key = key ? key : "";
    Gateways g;
    g.teacher = std::make_shared<ChatClient>(make_http_transport(config.endpoints.teacher, api_key), config.retry);
    g.scorer = std::make_shared<ChatClient>(make_http_transport(config.endpoints.scorer, api_key), config.retry);
    g.embedder = std::make_shared<EmbeddingClient>(make_http_transport(config.endpoints.embedder, api_key),
                                                   config.embedding_model, config.retry);
    return g;
}

fs::path manifest_path(const fs::path& output) {
    fs::path p = output;
    p += ".manifest.json";
    return p;
}

namespace {

fs::path partial_path(const fs::path& output) {
    fs::path p = output;
    p += ".partial";
    return p;
}

void stamp_stage(CuratedRecord& r, const StageContext& ctx, std::string_view stage) {
    if (!r.provenance.empty() && r.provenance.back().stage == stage) r.provenance.pop_back();
    r.stamp(std::string(stage), ctx.config_hash, ctx.config.timestamp);
}

PipelineManifest new_manifest(const StageContext& ctx, std::string_view stage) {
    PipelineManifest m;
    m.run_id = ctx.config_hash.substr(0, 16);
    m.stage = std::string(stage);
    m.config_hash = ctx.config_hash;
    m.random_seed = ctx.config.stage_seed(stage);
    return m;
}

// Live records count as output; every rejected record is tallied by code.
void account(PipelineManifest& m, const std::vector<CuratedRecord>& records) {
    for (const auto& r : records) {
        if (r.rejected()) m.tally(r.reject_reason()->code);
        else ++m.output_count;
    }
}

void finish(const PipelineManifest& m, const fs::path& out) {
    write_text_atomic(manifest_path(out), m.to_json_text());
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

template <typename Fn>
auto guarded(std::string_view stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.family(), "stage '" + std::string(stage) + "' failed: " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorFamily::Stage, "stage '" + std::string(stage) + "' failed: " + e.what());
    }
}

void sort_by_id(std::vector<CuratedRecord>& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
}

// Runs `step` on every record with status `todo` on up to `concurrency`
// threads. On failure the finished work is checkpointed to `<out>.partial`
// and the lowest-index error is rethrown.
template <typename Step>
std::vector<CuratedRecord> gateway_stage(const StageContext& ctx, const fs::path& in, const fs::path& out,
                                         Status todo, Step&& step) {
    auto records = read_records(in);
    const auto partial = partial_path(out);
    if (fs::exists(partial)) {
        auto resumed = read_records(partial);
        bool same = resumed.size() == records.size();
        for (std::size_t i = 0; same && i < records.size(); ++i) same = resumed[i].id() == records[i].id();
        if (same) records = std::move(resumed);
    }

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].status() == todo) pending.push_back(i);
    }
    struct Outcome {
        std::optional<CuratedRecord> record;
        std::exception_ptr error;
    };
    auto outcomes = parallel_map_ordered(pending, ctx.config.concurrency, [&](std::size_t i) {
        Outcome o;
        try {
            o.record.emplace(step(records[i]));
        } catch (...) {
            o.error = std::current_exception();
        }
        return o;
    });
    std::exception_ptr first;
    for (std::size_t k = 0; k < pending.size(); ++k) {
        if (outcomes[k].record) records[pending[k]] = std::move(*outcomes[k].record);
        else if (!first) first = outcomes[k].error;
    }
    if (first) {
        write_records_atomic(partial, records);
        std::rethrow_exception(first);
    }
    fs::remove(partial);
    return records;
}

}  // namespace

PipelineManifest run_sample(const StageContext& ctx, const std::vector<fs::path>& inputs, const fs::path& out) {
    return guarded("sample", [&] {
        if (inputs.empty()) throw Error(ErrorFamily::Usage, "no input pool files given");
        SamplingPlan plan = ctx.config.sampling;
        plan.random_seed = ctx.config.stage_seed("sample");
        StratifiedSampler sampler(plan);
        std::size_t seen = 0;
        ingest_stream(inputs, ctx.config.input_format, [&](SeedSample&& s) {
            ++seen;
            sampler.offer(std::move(s));
        });
        auto sampled = sampler.finish();

        auto m = new_manifest(ctx, "sample");
        m.input_count = seen;
        m.output_count = sampled.size();
        std::map<std::string, std::size_t> kept;
        for (const auto& s : sampled) ++kept[s.category];
        for (const auto& [cat, n] : sampler.seen_per_category()) {
            if (kept[cat] < n) {
                m.warnings.push_back("category '" + cat + "': kept " + std::to_string(kept[cat]) + " of " +
                                     std::to_string(n));
            }
        }
        std::vector<CuratedRecord> records;
        records.reserve(sampled.size());
        for (auto& s : sampled) {
            records.emplace_back(std::move(s));
            stamp_stage(records.back(), ctx, "sample");
        }
        ensure_parent(out);
        write_records_atomic(out, records);
        finish(m, out);
        return m;
    });
}

PipelineManifest run_distill(const StageContext& ctx, const fs::path& in, const fs::path& out) {
    return guarded("distill", [&] {
        if (!ctx.gateways || !ctx.gateways->teacher) throw Error(ErrorFamily::Usage, "no teacher gateway");
        ensure_parent(out);
        const ChatClient& teacher = *ctx.gateways->teacher;
        auto records = gateway_stage(ctx, in, out, Status::Seeded, [&](const CuratedRecord& r) {
            return distill(r, ctx.config.teacher, teacher);
        });
        auto m = new_manifest(ctx, "distill");
        m.input_count = records.size();
        account(m, records);
        for (auto& r : records) stamp_stage(r, ctx, "distill");
        write_records_atomic(out, records);
        finish(m, out);
        return m;
    });
}

PipelineManifest run_score(const StageContext& ctx, const fs::path& in, const fs::path& out) {
    return guarded("score", [&] {
        if (!ctx.gateways || !ctx.gateways->scorer) throw Error(ErrorFamily::Usage, "no scorer gateway");
        ensure_parent(out);
        const ChatClient& scorer = *ctx.gateways->scorer;
        auto records = gateway_stage(ctx, in, out, Status::Distilled, [&](const CuratedRecord& r) {
            return annotate(r, ctx.config.scorer, scorer);
        });
        auto m = new_manifest(ctx, "score");
        m.input_count = records.size();
        account(m, records);
        for (auto& r : records) stamp_stage(r, ctx, "score");
        write_records_atomic(out, records);
        finish(m, out);
        return m;
    });
}

PipelineManifest run_filter(const StageContext& ctx, const fs::path& in, const fs::path& out,
                            const fs::path& rejects) {
    return guarded("filter", [&] {
        auto records = read_records(in);
        std::vector<CuratedRecord> kept;
        std::vector<CuratedRecord> dropped;
        for (const auto& r : records) {
            auto f = stage1_filter(r, ctx.config.stage1);
            stamp_stage(f, ctx, "filter");
            (f.rejected() ? dropped : kept).push_back(std::move(f));
        }
        auto m = new_manifest(ctx, "filter");
        m.input_count = records.size();
        account(m, kept);
        account(m, dropped);
        ensure_parent(out);
        ensure_parent(rejects);
        write_records_atomic(rejects, dropped);
        write_records_atomic(out, kept);
        finish(m, out);
        return m;
    });
}

PipelineManifest run_select(const StageContext& ctx, const fs::path& in, const fs::path& out,
                            const fs::path& rejects) {
    return guarded("select", [&] {
        auto records = read_records(in);
        std::vector<CuratedRecord> live;
        std::vector<CuratedRecord> dropped;
        for (auto& r : records) (r.rejected() ? dropped : live).push_back(r);
        auto split = split_by_strategy(live, ctx.config.subset.strategy, ctx.config.stage_seed("select"));
        for (auto& r : split.dropped) dropped.push_back(std::move(r));
        sort_by_id(dropped);
        for (auto& r : split.kept) stamp_stage(r, ctx, "select");
        for (auto& r : dropped) stamp_stage(r, ctx, "select");

        auto m = new_manifest(ctx, "select");
        m.input_count = records.size();
        account(m, split.kept);
        account(m, dropped);
        ensure_parent(out);
        ensure_parent(rejects);
        write_records_atomic(rejects, dropped);
        write_records_atomic(out, split.kept);
        finish(m, out);
        return m;
    });
}

PipelineManifest run_diversify(const StageContext& ctx, const fs::path& in, const fs::path& out,
                               const fs::path& rejects, const fs::path& clusters_out) {
    return guarded("diversify", [&] {
        const auto& cfg = ctx.config;
        auto records = read_records(in);
        std::vector<CuratedRecord> live;
        for (const auto& r : records) {
            if (!r.rejected()) live.push_back(r);
        }
        TagClusterModel model;
        if (cfg.subset.diversity) {
            if (!ctx.gateways || !ctx.gateways->embedder) throw Error(ErrorFamily::Usage, "no embedder gateway");
            model = build_tag_cluster_model(corpus_tags(live), *ctx.gateways->embedder, cfg.clustering);
        }
        auto result = diversify(records, cfg.subset.target_size, cfg.subset.diversity, model,
                                cfg.stage_seed("diversify"), cfg.clustering.metric);
        for (auto& r : result.accepted) stamp_stage(r, ctx, "diversify");
        for (auto& r : result.rejected) stamp_stage(r, ctx, "diversify");

        auto m = new_manifest(ctx, "diversify");
        m.input_count = records.size();
        m.warnings = result.warnings;
        account(m, result.accepted);
        account(m, result.rejected);
        ensure_parent(out);
        ensure_parent(rejects);
        ensure_parent(clusters_out);
        write_text_atomic(clusters_out, model.to_json_text());
        write_records_atomic(rejects, result.rejected);
        write_records_atomic(out, result.accepted);
        finish(m, out);
        return m;
    });
}

PipelineManifest run_stats(const StageContext& ctx, const fs::path& in, const fs::path& report_json,
                           const std::optional<fs::path>& report_md, const std::vector<fs::path>& manifests) {
    return guarded("stats", [&] {
        auto records = read_records(in);
        std::vector<CuratedRecord> live;
        for (const auto& r : records) {
            if (!r.rejected()) live.push_back(r);
        }
        StatsBundle bundle = compute_stats(live, ctx.config.top_n);
        for (const auto& p : manifests) bundle.manifests.push_back(PipelineManifest::from_json_text(read_text(p)));

        auto m = new_manifest(ctx, "stats");
        m.input_count = records.size();
        account(m, records);
        ensure_parent(report_json);
        write_text_atomic(report_json, render_report(bundle, ReportFormat::Structured));
        if (report_md) {
            ensure_parent(*report_md);
            write_text_atomic(*report_md, render_report(bundle, ReportFormat::Markdown));
        }
        finish(m, report_json);
        return m;
    });
}

fs::path RunLayout::output_of(std::string_view stage) const {
    if (stage == "sample") return pool();
    if (stage == "distill") return traced();
    if (stage == "score") return scored();
    if (stage == "filter") return kept();
    if (stage == "select") return selected();
    if (stage == "diversify") return corpus();
    if (stage == "stats") return report_json();
    throw Error(ErrorFamily::Usage, "unknown stage '" + std::string(stage) + "'");
}

namespace {

std::vector<PipelineManifest> run_from(const RunConfig& config, Gateways& gateways, int first_rank,
                                       std::vector<PipelineManifest> done) {
    const RunLayout L{config.work_dir};
    fs::create_directories(L.dir);
    const StageContext ctx{config, config.hash(), &gateways};
    const auto wants = [&](std::string_view stage) { return stage_rank(stage) >= first_rank; };

    if (wants("sample")) done.push_back(run_sample(ctx, config.inputs, L.pool()));
    if (wants("distill")) done.push_back(run_distill(ctx, L.pool(), L.traced()));
    if (wants("score")) done.push_back(run_score(ctx, L.traced(), L.scored()));
    if (wants("filter")) done.push_back(run_filter(ctx, L.scored(), L.kept(), L.rejects()));
    if (wants("select")) done.push_back(run_select(ctx, L.kept(), L.selected(), L.select_rejects()));
    if (wants("diversify")) {
        done.push_back(run_diversify(ctx, L.selected(), L.corpus(), L.diversify_rejects(), L.tag_clusters()));
    }
    if (wants("stats")) {
        std::vector<fs::path> manifests;
        for (const auto stage : kStageOrder) {
            if (stage != "stats") manifests.push_back(manifest_path(L.output_of(stage)));
        }
        done.push_back(run_stats(ctx, L.corpus(), L.report_json(), L.report_md(), manifests));
    }
    return done;
}

}  // namespace

std::vector<PipelineManifest> run_pipeline(const RunConfig& config, Gateways& gateways) {
    config.validate();
    return run_from(config, gateways, 0, {});
}

std::vector<PipelineManifest> resume(const RunConfig& config, Gateways& gateways, std::string_view from_stage) {
    config.validate();
    const int rank = stage_rank(from_stage);
    if (rank < 0) throw Error(ErrorFamily::Usage, "unknown stage '" + std::string(from_stage) + "'");
    const RunLayout L{config.work_dir};
    const auto hash = config.hash();
    std::vector<PipelineManifest> done;
    for (int r = 0; r < rank; ++r) {
        const auto stage = kStageOrder[r];
        const auto out = L.output_of(stage);
        const auto mp = manifest_path(out);
        if (!fs::exists(mp) || !fs::exists(out)) {
            throw Error(ErrorFamily::MissingArtifact, "MissingArtifact: stage '" + std::string(stage) +
                                                          "' has no completed output in " + L.dir.string());
        }
        auto m = PipelineManifest::from_json_text(read_text(mp));
        if (m.config_hash != hash) {
            throw Error(ErrorFamily::ConfigMismatch, "ConfigHashMismatch: stage '" + std::string(stage) +
                                                         "' ran under config " + m.config_hash.substr(0, 12) +
                                                         ", current config is " + hash.substr(0, 12));
        }
        done.push_back(std::move(m));
    }
    return run_from(config, gateways, rank, std::move(done));
}

}  // namespace cotc
