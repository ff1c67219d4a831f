#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotc/error.hpp"

namespace cotc {

enum class Status { Seeded, Distilled, Annotated, Accepted, Rejected };

enum class RejectCode {
    MissingTags,
    TooShort,
    TooLong,
    Placeholder,
    Repetition,
    Unstable,
    BadScoreJson,
    LowDifficulty,
    NotSelected,
};

inline constexpr RejectCode kAllRejectCodes[] = {
    RejectCode::MissingTags, RejectCode::TooShort,     RejectCode::TooLong,
    RejectCode::Placeholder, RejectCode::Repetition,   RejectCode::Unstable,
    RejectCode::BadScoreJson, RejectCode::LowDifficulty, RejectCode::NotSelected,
};

std::string_view to_string(Status s);
std::string_view to_string(RejectCode c);
Status parse_status(std::string_view s);
RejectCode parse_reject_code(std::string_view s);

struct SeedSample {
    std::string id;
    std::string source_dataset;
    std::string category;
    std::string image_ref;  // opaque; never dereferenced
    std::string instruction;
    std::optional<std::string> reference_answer;

    void validate() const;
    bool operator==(const SeedSample&) const = default;
};

struct DistilledTrace {
    std::string think_text;
    std::string answer_text;
    std::string raw_text;  // verbatim teacher output
    std::size_t token_count = 0;
    bool stray_text = false;  // non-whitespace text outside the two blocks

    bool operator==(const DistilledTrace&) const = default;
};

struct Annotation {
    int difficulty = 0;
    int quality = 0;
    std::vector<std::string> tags;  // sorted, unique, lowercase, trimmed

    // Normalizes tags (trim, lowercase, dedupe, sort) and checks ranges.
    static Annotation make(int difficulty, int quality, const std::vector<std::string>& raw_tags);
    void validate() const;
    bool operator==(const Annotation&) const = default;
};

std::vector<std::string> normalize_tags(const std::vector<std::string>& raw);

struct RejectReason {
    RejectCode code;
    std::string detail;

    bool operator==(const RejectReason&) const = default;
};

struct StageStamp {
    std::string stage;
    std::string config_hash;
    std::string timestamp;

    bool operator==(const StageStamp&) const = default;
};

// Canonical stage order; position in this list is the stage rank.
inline constexpr std::string_view kStageOrder[] = {
    "sample", "distill", "score", "filter", "select", "diversify", "stats",
};
int stage_rank(std::string_view stage);  // -1 for unknown stages

// Pipeline unit of work. Status and reject reason are coupled: both only
// change through advance()/reject(), and restore() validates a full state.
class CuratedRecord {
public:
    explicit CuratedRecord(SeedSample s);

    static CuratedRecord restore(SeedSample s, std::optional<DistilledTrace> trace,
                                 std::optional<Annotation> annotation, Status status,
                                 std::optional<RejectReason> reason,
                                 std::vector<StageStamp> provenance);

    SeedSample seed;
    std::optional<DistilledTrace> trace;
    std::optional<Annotation> annotation;
    std::vector<StageStamp> provenance;

    Status status() const noexcept { return status_; }
    const std::optional<RejectReason>& reject_reason() const noexcept { return reason_; }
    bool rejected() const noexcept { return status_ == Status::Rejected; }
    const std::string& id() const noexcept { return seed.id; }

    // Moves forward to `next` (never backward, never out of Rejected).
    void advance(Status next);
    void reject(RejectCode code, std::string detail = {});
    void stamp(std::string stage, std::string config_hash, std::string timestamp);

    void validate() const;
    bool operator==(const CuratedRecord&) const = default;

private:
    Status status_ = Status::Seeded;
    std::optional<RejectReason> reason_;
};

std::string encode_record(const CuratedRecord& record);
CuratedRecord decode_record(std::string_view line);

// Deterministic 128-bit hex id over (source_dataset, native_key).
std::string stable_id(std::string_view source_dataset, std::string_view native_key);

struct PipelineManifest {
    std::string run_id;
    std::string stage;
    std::string config_hash;
    std::size_t input_count = 0;
    std::size_t output_count = 0;
    std::map<std::string, std::size_t> reject_counts;  // keyed by reject code name
    std::uint64_t random_seed = 0;
    std::vector<std::string> warnings;

    std::size_t total_rejects() const;
    bool conserved() const { return output_count + total_rejects() == input_count; }
    void tally(RejectCode code, std::size_t n = 1);

    std::string to_json_text() const;
    static PipelineManifest from_json_text(std::string_view text);
    bool operator==(const PipelineManifest&) const = default;
};

}  // namespace cotc
