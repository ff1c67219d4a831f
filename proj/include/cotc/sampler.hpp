#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotc/random.hpp"
#include "cotc/record.hpp"

namespace cotc {

struct SamplingPlan {
    std::size_t per_category_cap = 20000;
    std::optional<std::size_t> target_total;
    std::uint64_t random_seed = 0;

    void validate() const;
};

// Line adapter for a raw pool format. "canonical" (the record format) and
// "qa" ({dataset, key, category, image, question, answer}) are built in.
using SeedAdapter = std::function<SeedSample(std::string_view line)>;
void register_adapter(const std::string& name, SeedAdapter adapter);
bool has_adapter(const std::string& name);

// Streams validated samples from `paths` in file order. Duplicate ids and
// malformed lines raise errors that name the id or "file:line".
void ingest_stream(const std::vector<std::filesystem::path>& paths, const std::string& format,
                   const std::function<void(SeedSample&&)>& sink);
std::vector<SeedSample> ingest(const std::vector<std::filesystem::path>& paths,
                               const std::string& format = "canonical");

// Single-pass per-category reservoirs. Each category draws from its own RNG
// stream derived from (seed, category), so interleaving across categories
// does not change the selection.
class StratifiedSampler {
public:
    explicit StratifiedSampler(SamplingPlan plan);
    void offer(SeedSample sample);
    std::vector<SeedSample> finish();  // sorted by id

    const std::map<std::string, std::size_t>& seen_per_category() const { return seen_; }

private:
    struct Reservoir {
        Rng rng;
        std::vector<SeedSample> items;
    };
    SamplingPlan plan_;
    std::map<std::string, Reservoir> reservoirs_;
    std::map<std::string, std::size_t> seen_;
};

std::vector<SeedSample> stratified_sample(const std::vector<SeedSample>& pool, const SamplingPlan& plan);

// Splits `total` across keys proportionally to `sizes` (floor + largest
// remainder; remainder ties go to the smaller key). Requires total <= sum.
std::map<std::string, std::size_t> largest_remainder_allocation(const std::map<std::string, std::size_t>& sizes,
                                                                 std::size_t total);

}  // namespace cotc
