// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include <omp.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cotc/jsonl.hpp"
#include "cotc/quality.hpp"
#include "cotc/sampler.hpp"
#include "cotc/selector.hpp"
#include "cotc/stats.hpp"
#include "cotc/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cotc;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
    void expect(bool ok, const std::string& why) {
        if (!ok) fail(why);
    }
};

int failures = 0;

void criterion(int n, const std::string& name, double limit_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs >= limit_s) o.fail("took " + std::to_string(secs) + " s, limit " + std::to_string(limit_s) + " s");
    std::printf("criterion %d: %s  %s (%.2f s)%s%s\n", n, o.pass ? "PASS" : "FAIL", name.c_str(), secs,
                o.detail.empty() ? "" : "  ", o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
}

std::vector<CuratedRecord> random_corpus(Rng& rng, std::size_t n) {
    static const std::vector<std::string> vocab = {"object", "spatial", "count", "chart", "math", "scene"};
    std::vector<CuratedRecord> rs;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = testing::annotated_record(testing::padded_id(i), 1, 1, {"x"});
        r.annotation = testing::random_annotation(rng, vocab);
        rs.push_back(std::move(r));
    }
    shuffle_in_place(rs, rng);
    return rs;
}

std::set<std::string> id_set(const std::vector<CuratedRecord>& rs) {
    std::set<std::string> s;
    for (const auto& r : rs) s.insert(r.id());
    return s;
}

std::vector<std::string> id_list(const std::vector<CuratedRecord>& rs) {
    std::vector<std::string> v;
    for (const auto& r : rs) v.push_back(r.id());
    return v;
}

void parser_mutations(Outcome& o) {
    Rng rng(1001);
    int malformed = 0;
    const int cases = 1000;
    for (int i = 0; i < cases && o.pass; ++i) {
        const auto raw = oracle::mutated_trace(rng);
        malformed += oracle::classify_trace(raw).error.has_value();
        const auto why = oracle::trace_disagreement(raw);
        o.expect(why.empty(), why + " on case " + std::to_string(i));
    }
    o.expect(malformed >= 200, "fewer than 200 malformed traces generated");
    if (o.pass) o.detail = std::to_string(cases) + " traces, " + std::to_string(malformed) + " malformed, all agree";
}

void planted_faults(Outcome& o) {
    const auto corpus = oracle::planted_stage1_corpus(1002);
    const Stage1Config cfg;
    std::map<RejectCode, int> got;
    int kept = 0;
    for (const auto& r : corpus.records) {
        const auto out = stage1_filter(r, cfg);
        if (out.rejected()) ++got[out.reject_reason()->code];
        else ++kept;
    }
    for (const auto& [code, n] : corpus.planted) o.expect(n == 10, "generator planted " + std::to_string(n) + " of a code");
    o.expect(corpus.planted.size() == 5, "expected five planted codes");
    o.expect(kept == 950, "kept " + std::to_string(kept));
    o.expect(got == corpus.planted, "reject tallies differ from the planted ones");
    if (o.pass) o.detail = "950 kept, 10 each of TooShort TooLong Placeholder Repetition Unstable";
}

void length_boundaries(Outcome& o) {
    Rng rng(1003);
    const Stage1Config cfg;
    const std::pair<std::size_t, bool> cases[] = {{19, false}, {20, true}, {4000, true}, {4001, false}};
    for (const auto& [n, pass] : cases) {
        const auto r = oracle::with_think("r", oracle::join(oracle::clean_tokens(rng, n)));
        o.expect(r.trace->token_count == n, "fixture has the wrong token count");
        o.expect(count_tokens(r.trace->think_text) == n, "tokenizer disagrees with fixture");
        const auto out = stage1_filter(r, cfg);
        o.expect(out.rejected() != pass, std::to_string(n) + " tokens: wrong verdict");
        if (!pass && out.rejected()) {
            const auto want = n < 20 ? RejectCode::TooShort : RejectCode::TooLong;
            o.expect(out.reject_reason()->code == want, std::to_string(n) + " tokens: wrong code");
        }
    }
    if (o.pass) o.detail = "19 reject, 20 pass, 4000 pass, 4001 reject";
}

void dbscan_oracle(Outcome& o) {
    Rng rng(1004);
    for (int trial = 0; trial < 100 && o.pass; ++trial) {
        const auto n = 1 + uniform_below(rng, 200);
        const auto d = 1 + uniform_below(rng, 8);
        const auto pts = oracle::random_points(rng, n, d, 0.05 + uniform01(rng) * 0.4);
        const Metric metric = uniform_below(rng, 2) ? Metric::Cosine : Metric::Euclidean;
        const double eps = metric == Metric::Cosine ? 0.01 + uniform01(rng) * 0.2 : 0.05 + uniform01(rng) * 0.6;
        const std::size_t min_pts = 1 + uniform_below(rng, 6);
        const auto want = oracle::dbscan(pts, eps, min_pts, metric);
        const ClusteringConfig cfg{eps, min_pts, metric};
        o.expect(oracle::same_partition(dbscan(pts, cfg, Execution::Serial), want),
                 "serial partition differs on instance " + std::to_string(trial));
        o.expect(oracle::same_partition(dbscan(pts, cfg, Execution::Parallel), want),
                 "parallel partition differs on instance " + std::to_string(trial));
    }
    if (o.pass) o.detail = "100 instances, serial and parallel";
}

void fps_optimality(Outcome& o) {
    Rng rng(1005);
    const int trials = 500;
    for (int trial = 0; trial < trials && o.pass; ++trial) {
        const auto n = 1 + uniform_below(rng, 12);
        const auto k = 1 + uniform_below(rng, std::min<std::size_t>(n, 5));
        const bool coarse = uniform_below(rng, 2);
        const auto ps = oracle::random_profiles(rng, n, 1 + uniform_below(rng, 4), coarse);
        const Metric metric = uniform_below(rng, 2) ? Metric::Cosine : Metric::Euclidean;
        const auto serial = farthest_point_sampling(ps, k, 0, FpsOptions{metric, false, Execution::Serial});
        const auto parallel = farthest_point_sampling(ps, k, 0, FpsOptions{metric, false, Execution::Parallel});
        o.expect(serial.size() == k, "wrong pick count");
        o.expect(serial == parallel, "serial and parallel picks differ");
        const auto why = oracle::fps_disagreement(ps, serial, metric, coarse);
        o.expect(why.empty(), why + " on instance " + std::to_string(trial));
    }
    if (o.pass) o.detail = std::to_string(trials) + " instances, n<=12, k<=5";
}

void strategy_oracle(Outcome& o) {
    Rng rng(1006);
    for (int trial = 0; trial < 20 && o.pass; ++trial) {
        const auto rs = random_corpus(rng, 500);
        const int q = 1 + static_cast<int>(uniform_below(rng, 5));
        const int d = 1 + static_cast<int>(uniform_below(rng, 5));
        std::set<std::string> qo, dq, both;
        for (const auto& r : rs) {
            if (r.annotation->quality >= q) qo.insert(r.id());
            if (r.annotation->difficulty >= d) dq.insert(r.id());
            if (r.annotation->quality >= q && r.annotation->difficulty >= d) both.insert(r.id());
        }
        const auto got_q = id_set(select_by_strategy(rs, SelectionStrategy::quality_only(q), 3));
        const auto got_d = id_set(select_by_strategy(rs, SelectionStrategy::difficulty_only(d), 3));
        const auto got_b = id_set(select_by_strategy(rs, SelectionStrategy::quality_and_difficulty(q, d), 3));
        o.expect(got_q == qo, "QualityOnly differs from the predicate filter");
        o.expect(got_d == dq, "DifficultyOnly differs from the predicate filter");
        o.expect(got_b == both, "QualityAndDifficulty differs from the predicate filter");
        std::set<std::string> inter;
        std::set_intersection(got_q.begin(), got_q.end(), got_d.begin(), got_d.end(), std::inserter(inter, inter.end()));
        o.expect(got_b == inter, "QualityAndDifficulty is not the intersection");

        // Random: a seeded draw of n positions over the id-sorted pool.
        const auto n = uniform_below(rng, 501);
        const std::uint64_t seed = rng();
        std::vector<std::string> sorted_ids = id_list(rs);
        std::sort(sorted_ids.begin(), sorted_ids.end());
        Rng draw(seed);
        std::vector<std::string> want;
        for (std::size_t i : sample_indices(sorted_ids.size(), n, draw)) want.push_back(sorted_ids[i]);
        o.expect(id_list(select_by_strategy(rs, SelectionStrategy::random(n), seed)) == want,
                 "Random differs from the seeded draw");
    }
    if (o.pass) o.detail = "20 corpora of 500, all four strategies";
}

void stratified_cap(Outcome& o) {
    Rng rng(1007);
    for (int trial = 0; trial < 30 && o.pass; ++trial) {
        const auto n_cat = 1 + uniform_below(rng, 10);
        std::vector<SeedSample> pool;
        std::size_t remaining = 5000;
        for (std::size_t c = 0; c < n_cat; ++c) {
            const auto size = uniform_below(rng, std::min<std::size_t>(remaining, 1500) + 1);
            remaining -= size;
            const auto cat = "cat" + std::to_string(c);
            for (std::size_t i = 0; i < size; ++i) pool.push_back({cat + "-" + testing::padded_id(i), "ds", cat, "", "q", std::nullopt});
        }
        shuffle_in_place(pool, rng);
        SamplingPlan plan;
        plan.per_category_cap = 1 + uniform_below(rng, 300);
        plan.random_seed = rng();
        std::map<std::string, std::size_t> counts;
        for (const auto& s : stratified_sample(pool, plan)) ++counts[s.category];
        for (const auto& [cat, c] : counts) o.expect(c <= plan.per_category_cap, cat + " exceeds the cap");
    }
    std::vector<SeedSample> pool;
    for (std::size_t i = 0; i < 100; ++i) pool.push_back({"u-" + testing::padded_id(i), "ds", "u", "", "q", std::nullopt});
    std::map<std::string, int> hits;
    const int runs = 1000;
    for (int run = 0; run < runs; ++run) {
        SamplingPlan plan;
        plan.per_category_cap = 10;
        plan.random_seed = static_cast<std::uint64_t>(run);
        for (const auto& s : stratified_sample(pool, plan)) ++hits[s.id];
    }
    double lo = 1, hi = 0;
    for (const auto& s : pool) {
        const double f = static_cast<double>(hits[s.id]) / runs;
        lo = std::min(lo, f);
        hi = std::max(hi, f);
    }
    o.expect(lo >= 0.05 && hi <= 0.15, "inclusion frequency outside 10% +/- 5");
    char buf[96];
    std::snprintf(buf, sizeof buf, "inclusion frequency range [%.3f, %.3f]", lo, hi);
    if (o.pass) o.detail = buf;
    else o.detail += std::string("; ") + buf;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(COTC_BINARY) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void end_to_end(Outcome& o) {
    testing::TempDir dir;
    const auto pool = (testing::fixture_dir() / "pool60.jsonl").string();
    for (const char* name : {"a", "b"}) {
        write_text_atomic(dir / (std::string(name) + ".json"),
                          "{\"work_dir\": \"" + (dir / name).string() + "\", \"random_seed\": 11, \"input\": {\"paths\": [\"" +
                              pool + "\"]}, \"subset\": {\"target_size\": 10, \"strategy\": \"difficulty:4\"}}");
        const int code = run_cli("--config " + (dir / (std::string(name) + ".json")).string() + " --mock run");
        o.expect(code == 0, std::string("run ") + name + " exited " + std::to_string(code));
    }
    if (!o.pass) return;
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        const auto f = e.path().filename().string();
        const bool wanted = f == "corpus.jsonl" || f == "report.json" || f.find(".manifest.json") != std::string::npos;
        if (!wanted) continue;
        o.expect(fs::exists(dir / "b" / f), f + " missing from the second run");
        if (o.pass) o.expect(read_text(e.path()) == read_text(dir / "b" / f), f + " differs");
        ++compared;
    }
    o.expect(compared == 9, "expected corpus, report and 7 manifests, compared " + std::to_string(compared));
    if (o.pass) o.detail = std::to_string(compared) + " artifacts byte-identical";
}

void statistics(Outcome& o) {
    std::vector<CuratedRecord> small;
    const int ds[] = {3, 3, 4, 2};
    const std::vector<std::vector<std::string>> tags = {{"a", "b"}, {"a"}, {"b"}, {"c"}};
    for (int i = 0; i < 4; ++i) small.push_back(testing::annotated_record("r" + std::to_string(i), ds[i], 5, tags[i]));
    const auto d = compute_distribution(small, Axis::Difficulty);
    o.expect(d.counts == std::map<int, std::size_t>{{1, 0}, {2, 1}, {3, 2}, {4, 1}, {5, 0}}, "hand-counted difficulty");
    o.expect(d.percentages == std::map<int, std::int64_t>{{1, 0}, {2, 2500}, {3, 5000}, {4, 2500}, {5, 0}}, "hand-counted percentages");
    const auto t = compute_tag_frequency(small, 10);
    o.expect(t.entries == std::vector<TagFrequency>{{"a", 2, 0.5}, {"b", 2, 0.5}, {"c", 1, 0.25}}, "hand-counted tags");

    std::vector<int> dl, ql;
    for (const auto& [l, n] : std::map<int, int>{{1, 1}, {2, 236}, {3, 465}, {4, 296}, {5, 2}}) dl.insert(dl.end(), n, l);
    for (const auto& [l, n] : std::map<int, int>{{3, 21}, {4, 64}, {5, 915}}) ql.insert(ql.end(), n, l);
    std::vector<CuratedRecord> shape;
    for (std::size_t i = 0; i < dl.size(); ++i) shape.push_back(testing::annotated_record(testing::padded_id(i), dl[i], ql[(i * 7919) % ql.size()], {"x"}));
    const auto bundle = compute_stats(shape, 400);
    for (const auto* rep : {&bundle.difficulty, &bundle.quality}) {
        std::int64_t sum = 0;
        for (const auto& [l, p] : rep->percentages) sum += p;
        o.expect(sum >= 9995 && sum <= 10005, "percentages sum to " + format_hundredths(sum));
    }
    const auto md = render_report(bundle, ReportFormat::Markdown);
    const auto diff_at = md.find("## Difficulty");
    const auto qual_at = md.find("## Quality");
    o.expect(diff_at != std::string::npos && qual_at != std::string::npos, "report sections missing");
    if (!o.pass) return;
    o.expect(md.find("| 3 | 465 | 46.50 |", diff_at) < qual_at, "difficulty row 3 is not 46.50");
    o.expect(md.find("| 5 | 915 | 91.50 |", qual_at) != std::string::npos, "quality row 5 is not 91.50");

    Rng rng(1009);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rs = random_corpus(rng, 1 + uniform_below(rng, 400));
        for (const auto axis : {Axis::Difficulty, Axis::Quality}) {
            const auto rep = compute_distribution(rs, axis);
            std::int64_t sum = 0;
            for (const auto& [l, p] : rep.percentages) sum += p;
            o.expect(sum >= 9995 && sum <= 10005, "random corpus percentages sum to " + format_hundredths(sum));
        }
    }
    if (o.pass) o.detail = "difficulty {3: 46.50}, quality {5: 91.50}";
}

void diversity_effect(Outcome& o) {
    Rng rng(1010);
    double fps_out = 0, random_out = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const auto ps = oracle::planted_cluster(rng);
        for (const auto& id : farthest_point_sampling(ps, 10, static_cast<std::uint64_t>(t))) fps_out += !oracle::in_planted_cluster(id);
        for (std::size_t i : sample_indices(ps.size(), 10, rng)) random_out += !oracle::in_planted_cluster(ps[i].record_id);
    }
    fps_out /= trials;
    random_out /= trials;
    char buf[96];
    std::snprintf(buf, sizeof buf, "out-of-cluster picks: fps %.2f, random %.2f", fps_out, random_out);
    o.expect(fps_out - random_out >= 1.5, buf);
    if (o.pass) o.detail = buf;
}

}  // namespace

int main() {
    omp_set_num_threads(4);
    criterion(1, "trace parser agrees with the oracle on mutated traces", 5, parser_mutations);
    criterion(2, "stage-1 planted-fault corpus", 10, planted_faults);
    criterion(3, "length boundary exactness", 0, length_boundaries);
    criterion(4, "DBSCAN matches the naive reference", 30, dbscan_oracle);
    criterion(5, "FPS per-step optimality", 30, fps_optimality);
    criterion(6, "selection strategies equal predicate filters", 0, strategy_oracle);
    criterion(7, "stratified cap and uniform inclusion", 0, stratified_cap);
    criterion(8, "end-to-end determinism of two runs", 60, end_to_end);
    criterion(9, "statistics exactness", 0, statistics);
    criterion(10, "FPS diversity effect over random selection", 0, diversity_effect);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
