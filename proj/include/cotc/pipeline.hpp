#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotc/annotator.hpp"
#include "cotc/distiller.hpp"
#include "cotc/gateway.hpp"
#include "cotc/mock.hpp"
#include "cotc/quality.hpp"
#include "cotc/record.hpp"
#include "cotc/sampler.hpp"
#include "cotc/selector.hpp"
#include "cotc/stats.hpp"

namespace cotc {

namespace fs = std::filesystem;

struct Endpoints {
    std::string teacher = "http://127.0.0.1:8000";
    std::string scorer = "http://127.0.0.1:8000";
    std::string embedder = "http://127.0.0.1:8000";
};

// Everything a run needs. Loaded from a JSON document; see README.md.
struct RunConfig {
    fs::path work_dir = "run";
    std::uint64_t random_seed = 0;
    std::size_t concurrency = 4;
    // Stamped into provenance. Fixed by default so reruns are byte-identical.
    std::string timestamp = "1970-01-01T00:00:00Z";

    std::vector<fs::path> inputs;
    std::string input_format = "canonical";

    Endpoints endpoints;
    std::string api_key_env = "COTC_API_KEY";
    std::string embedding_model = "text-embedding-v3";
    RetryPolicy retry;

    TeacherConfig teacher;
    ScorerConfig scorer;
    SamplingPlan sampling;
    Stage1Config stage1;
    ClusteringConfig clustering;
    SubsetSpec subset;
    std::size_t top_n = 400;

    void validate() const;

    // Relative paths (inputs, work_dir, lexicon files) resolve against base_dir.
    static RunConfig from_json_text(std::string_view text, const fs::path& base_dir = ".");
    static RunConfig load(const fs::path& path);

    // Canonical form of every output-relevant setting: excludes work_dir,
    // concurrency, timestamp and endpoints. Credentials are never stored.
    std::string canonical_json() const;
    std::string hash() const;

    std::uint64_t stage_seed(std::string_view stage) const;
};

// Stage1Config from a JSON document (the "stage1" section of a run config).
Stage1Config load_stage1_config(const fs::path& path);

struct Gateways {
    std::shared_ptr<ChatClient> teacher;
    std::shared_ptr<ChatClient> scorer;
    std::shared_ptr<EmbeddingClient> embedder;
};

// `mock` unset: real HTTP endpoints. Set to an empty path: the built-in mock.
// Set to a directory: a mock loaded from that fixture directory.
Gateways make_gateways(const RunConfig& config, const std::optional<fs::path>& mock);
Gateways make_gateways(const RunConfig& config, std::shared_ptr<Transport> transport, Sleeper sleeper = real_sleeper());

struct StageContext {
    const RunConfig& config;
    std::string config_hash;
    Gateways* gateways = nullptr;
};

fs::path manifest_path(const fs::path& output);

// Each runner reads its input, writes outputs and `<out>.manifest.json`
// atomically, and returns the manifest. Failures are rethrown as errors whose
// message names the stage.
PipelineManifest run_sample(const StageContext& ctx, const std::vector<fs::path>& inputs, const fs::path& out);
// Gateway stages checkpoint to `<out>.partial` on failure and pick it up on
// the next attempt, skipping records that are already done.
PipelineManifest run_distill(const StageContext& ctx, const fs::path& in, const fs::path& out);
PipelineManifest run_score(const StageContext& ctx, const fs::path& in, const fs::path& out);
PipelineManifest run_filter(const StageContext& ctx, const fs::path& in, const fs::path& out,
                            const fs::path& rejects);
PipelineManifest run_select(const StageContext& ctx, const fs::path& in, const fs::path& out,
                            const fs::path& rejects);
PipelineManifest run_diversify(const StageContext& ctx, const fs::path& in, const fs::path& out,
                               const fs::path& rejects, const fs::path& clusters_out);
PipelineManifest run_stats(const StageContext& ctx, const fs::path& in, const fs::path& report_json,
                           const std::optional<fs::path>& report_md, const std::vector<fs::path>& manifests);

// Fixed artifact names inside RunConfig::work_dir.
struct RunLayout {
    fs::path dir;
    fs::path pool() const { return dir / "pool.jsonl"; }
    fs::path traced() const { return dir / "traced.jsonl"; }
    fs::path scored() const { return dir / "scored.jsonl"; }
    fs::path kept() const { return dir / "kept.jsonl"; }
    fs::path rejects() const { return dir / "rejects.jsonl"; }
    fs::path selected() const { return dir / "selected.jsonl"; }
    fs::path select_rejects() const { return dir / "select_rejects.jsonl"; }
    fs::path corpus() const { return dir / "corpus.jsonl"; }
    fs::path diversify_rejects() const { return dir / "diversify_rejects.jsonl"; }
    fs::path tag_clusters() const { return dir / "tag_clusters.json"; }
    fs::path report_json() const { return dir / "report.json"; }
    fs::path report_md() const { return dir / "report.md"; }
    // Primary output of `stage`; its manifest sits next to it.
    fs::path output_of(std::string_view stage) const;
};

std::vector<PipelineManifest> run_pipeline(const RunConfig& config, Gateways& gateways);

// Checks that every earlier stage left its manifest and output under the
// current config hash, then runs `from_stage` onward.
std::vector<PipelineManifest> resume(const RunConfig& config, Gateways& gateways, std::string_view from_stage);

}  // namespace cotc
