#include "cotc/sampler.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <unordered_set>

#include "cotc/error.hpp"
#include "cotc/hash.hpp"
#include "cotc/jsonl.hpp"
#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

namespace {

std::string string_field(const json& j, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (auto it = j.find(k); it != j.end() && it->is_string()) return it->get<std::string>();
        if (auto it = j.find(k); it != j.end() && it->is_number()) return it->dump();
    }
    return {};
}

SeedSample canonical_adapter(std::string_view line) { return decode_record(line).seed; }

SeedSample qa_adapter(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DecodeError("line", e.what());
    }
    SeedSample s;
    s.source_dataset = string_field(j, {"dataset", "source_dataset", "source"});
    const auto key = string_field(j, {"key", "id", "native_key"});
    if (s.source_dataset.empty()) throw DecodeError("dataset", "missing required field");
    if (key.empty()) throw DecodeError("key", "missing required field");
    s.id = stable_id(s.source_dataset, key);
    s.category = string_field(j, {"category"});
    if (s.category.empty()) s.category = s.source_dataset;
    s.image_ref = string_field(j, {"image", "image_ref"});
    s.instruction = string_field(j, {"question", "instruction"});
    if (auto a = string_field(j, {"answer", "reference_answer"}); !a.empty()) s.reference_answer = a;
    s.validate();
    return s;
}

std::mutex& registry_mutex() {
    static std::mutex mu;
    return mu;
}

std::map<std::string, SeedAdapter>& registry() {
    static std::map<std::string, SeedAdapter> r = {{"canonical", canonical_adapter}, {"qa", qa_adapter}};
    return r;
}

SeedAdapter find_adapter(const std::string& name) {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end()) throw Error(ErrorFamily::Usage, "unknown pool format '" + name + "'");
    return it->second;
}

}  // namespace

void SamplingPlan::validate() const {
    if (per_category_cap < 1) throw InvariantError("per_category_cap", "must be >= 1");
    if (target_total && *target_total < 1) throw InvariantError("target_total", "must be positive");
}

void register_adapter(const std::string& name, SeedAdapter adapter) {
    std::lock_guard lock(registry_mutex());
    registry()[name] = std::move(adapter);
}

bool has_adapter(const std::string& name) {
    std::lock_guard lock(registry_mutex());
    return registry().count(name) > 0;
}

void ingest_stream(const std::vector<std::filesystem::path>& paths, const std::string& format,
                   const std::function<void(SeedSample&&)>& sink) {
    const auto adapter = find_adapter(format);
    std::unordered_set<std::string> ids;
    for (const auto& path : paths) {
        for_each_line(path, [&](std::string_view line, std::size_t lineno) {
            SeedSample s;
            try {
                s = adapter(line);
                s.validate();
            } catch (const Error& e) {
                throw Error(ErrorFamily::Input, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (!ids.insert(s.id).second) {
                throw Error(ErrorFamily::Input, path.string() + ":" + std::to_string(lineno) +
                                                    ": duplicate id '" + s.id + "'");
            }
            sink(std::move(s));
        });
    }
}

std::vector<SeedSample> ingest(const std::vector<std::filesystem::path>& paths, const std::string& format) {
    std::vector<SeedSample> out;
    ingest_stream(paths, format, [&](SeedSample&& s) { out.push_back(std::move(s)); });
    return out;
}

StratifiedSampler::StratifiedSampler(SamplingPlan plan) : plan_(plan) { plan_.validate(); }

void StratifiedSampler::offer(SeedSample sample) {
    auto it = reservoirs_.find(sample.category);
    if (it == reservoirs_.end()) {
        it = reservoirs_.emplace(sample.category, Reservoir{Rng(derive_seed(plan_.random_seed, "category:" + sample.category)), {}})
                 .first;
    }
    auto& res = it->second;
    const std::size_t seen = ++seen_[sample.category];
    if (res.items.size() < plan_.per_category_cap) {
        res.items.push_back(std::move(sample));
        return;
    }
    const auto j = uniform_below(res.rng, seen);
    if (j < plan_.per_category_cap) res.items[j] = std::move(sample);
}

std::vector<SeedSample> StratifiedSampler::finish() {
    std::map<std::string, std::size_t> capped;
    std::size_t total = 0;
    for (const auto& [cat, res] : reservoirs_) {
        capped[cat] = res.items.size();
        total += res.items.size();
    }
    std::map<std::string, std::size_t> quota = capped;
    if (plan_.target_total && *plan_.target_total < total) {
        quota = largest_remainder_allocation(capped, *plan_.target_total);
    }
    std::vector<SeedSample> out;
    for (auto& [cat, res] : reservoirs_) {
        const std::size_t q = quota[cat];
        if (q >= res.items.size()) {
            for (auto& s : res.items) out.push_back(std::move(s));
        } else {
            for (std::size_t idx : sample_indices(res.items.size(), q, res.rng)) out.push_back(std::move(res.items[idx]));
        }
    }
    reservoirs_.clear();
    std::sort(out.begin(), out.end(), [](const SeedSample& a, const SeedSample& b) { return a.id < b.id; });
    return out;
}

std::vector<SeedSample> stratified_sample(const std::vector<SeedSample>& pool, const SamplingPlan& plan) {
    StratifiedSampler sampler(plan);
    for (const auto& s : pool) sampler.offer(s);
    return sampler.finish();
}

std::map<std::string, std::size_t> largest_remainder_allocation(const std::map<std::string, std::size_t>& sizes,
                                                                 std::size_t total) {
    unsigned __int128 sum = 0;
    for (const auto& [_, s] : sizes) sum += s;
    if (total > sum) throw InvariantError("target_total", "exceeds available samples");
    std::map<std::string, std::size_t> out;
    if (sum == 0) return out;
    struct Rem {
        unsigned __int128 rem;
        const std::string* key;
    };
    std::vector<Rem> rems;
    std::size_t assigned = 0;
    for (const auto& [k, s] : sizes) {
        const unsigned __int128 num = static_cast<unsigned __int128>(total) * s;
        out[k] = static_cast<std::size_t>(num / sum);
        assigned += out[k];
        rems.push_back({num % sum, &k});
    }
    std::stable_sort(rems.begin(), rems.end(), [](const Rem& a, const Rem& b) { return a.rem > b.rem; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[*rems[i].key];
    return out;
}

}  // namespace cotc
