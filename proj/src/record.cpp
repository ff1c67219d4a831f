#include "cotc/record.hpp"

#include <algorithm>
#include <set>

#include "cotc/error.hpp"
#include "cotc/hash.hpp"
#include "cotc/text.hpp"
#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

namespace {

constexpr std::string_view kStatusNames[] = {"seeded", "distilled", "annotated", "accepted",
                                             "rejected"};
constexpr std::string_view kCodeNames[] = {"missing_tags",   "too_short",      "too_long",
                                           "placeholder",    "repetition",     "unstable",
                                           "bad_score_json", "low_difficulty", "not_selected"};

int status_rank(Status s) {
    switch (s) {
        case Status::Seeded: return 0;
        case Status::Distilled: return 1;
        case Status::Annotated: return 2;
        case Status::Accepted: return 3;
        case Status::Rejected: return 4;
    }
    return 0;
}

const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw DecodeError(path + key, "missing required field");
    return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& path = {}) {
    const auto& v = require(obj, key, path);
    if (!v.is_string()) throw DecodeError(path + key, "expected string");
    return v.get<std::string>();
}

std::string optional_string(const json& obj, const char* key, const std::string& path = {}) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) throw DecodeError(path + key, "expected string");
    return it->get<std::string>();
}

std::int64_t require_int(const json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_number_integer()) throw DecodeError(path + key, "expected integer");
    return v.get<std::int64_t>();
}

}  // namespace

std::string_view to_string(Status s) { return kStatusNames[static_cast<int>(s)]; }
std::string_view to_string(RejectCode c) { return kCodeNames[static_cast<int>(c)]; }

Status parse_status(std::string_view s) {
    for (int i = 0; i < 5; ++i) {
        if (kStatusNames[i] == s) return static_cast<Status>(i);
    }
    throw DecodeError("status", "unknown status '" + std::string(s) + "'");
}

RejectCode parse_reject_code(std::string_view s) {
    for (int i = 0; i < 9; ++i) {
        if (kCodeNames[i] == s) return static_cast<RejectCode>(i);
    }
    throw DecodeError("reject_reason.code", "unknown reject code '" + std::string(s) + "'");
}

int stage_rank(std::string_view stage) {
    for (int i = 0; i < static_cast<int>(std::size(kStageOrder)); ++i) {
        if (kStageOrder[i] == stage) return i;
    }
    return -1;
}

void SeedSample::validate() const {
    if (id.empty()) throw InvariantError("id", "must be nonempty");
    if (category.empty()) throw InvariantError("category", "must be nonempty");
    if (trim(instruction).empty()) throw InvariantError("instruction", "must be nonempty after trimming");
}

std::vector<std::string> normalize_tags(const std::vector<std::string>& raw) {
    std::set<std::string> uniq;
    for (const auto& t : raw) {
        auto norm = to_lower_ascii(trim(t));
        if (!norm.empty()) uniq.insert(std::move(norm));
    }
    return {uniq.begin(), uniq.end()};
}

Annotation Annotation::make(int difficulty, int quality, const std::vector<std::string>& raw_tags) {
    Annotation a{difficulty, quality, normalize_tags(raw_tags)};
    a.validate();
    return a;
}

void Annotation::validate() const {
    if (difficulty < 1 || difficulty > 5) throw InvariantError("difficulty", "must be in [1,5]");
    if (quality < 1 || quality > 5) throw InvariantError("quality", "must be in [1,5]");
    if (tags.empty()) throw InvariantError("tags", "must contain at least one tag");
    if (normalize_tags(tags) != tags) throw InvariantError("tags", "must be normalized");
}

CuratedRecord::CuratedRecord(SeedSample s) : seed(std::move(s)) { seed.validate(); }

CuratedRecord CuratedRecord::restore(SeedSample s, std::optional<DistilledTrace> trace,
                                     std::optional<Annotation> annotation, Status status,
                                     std::optional<RejectReason> reason,
                                     std::vector<StageStamp> provenance) {
    CuratedRecord r(std::move(s));
    r.trace = std::move(trace);
    r.annotation = std::move(annotation);
    r.status_ = status;
    r.reason_ = std::move(reason);
    r.provenance = std::move(provenance);
    r.validate();
    return r;
}

void CuratedRecord::advance(Status next) {
    if (next == Status::Rejected) throw InvariantError("status", "use reject() to reject a record");
    if (status_ == Status::Rejected) throw InvariantError("status", "rejected records are terminal");
    if (status_rank(next) < status_rank(status_)) {
        throw InvariantError("status", "cannot move from " + std::string(to_string(status_)) +
                                           " back to " + std::string(to_string(next)));
    }
    status_ = next;
}

void CuratedRecord::reject(RejectCode code, std::string detail) {
    if (status_ == Status::Rejected) throw InvariantError("status", "record already rejected");
    status_ = Status::Rejected;
    reason_ = RejectReason{code, std::move(detail)};
}

void CuratedRecord::stamp(std::string stage, std::string config_hash, std::string timestamp) {
    provenance.push_back({std::move(stage), std::move(config_hash), std::move(timestamp)});
}

void CuratedRecord::validate() const {
    seed.validate();
    if ((status_ == Status::Rejected) != reason_.has_value()) {
        throw InvariantError("reject_reason", "must be present exactly when status is rejected");
    }
    if ((status_ == Status::Distilled || status_ == Status::Annotated) && !trace) {
        throw InvariantError("trace", "required for status " + std::string(to_string(status_)));
    }
    if ((status_ == Status::Annotated || status_ == Status::Accepted) && !annotation) {
        throw InvariantError("annotation", "required for status " + std::string(to_string(status_)));
    }
    if (annotation) annotation->validate();
    int last = -1;
    for (const auto& st : provenance) {
        const int rank = stage_rank(st.stage);
        if (rank < 0) continue;
        if (rank < last) throw InvariantError("provenance", "stage '" + st.stage + "' out of order");
        last = rank;
    }
}

std::string encode_record(const CuratedRecord& record) {
    record.validate();
    const auto& s = record.seed;
    json j = {
        {"id", s.id},
        {"source_dataset", s.source_dataset},
        {"category", s.category},
        {"image_ref", s.image_ref},
        {"instruction", s.instruction},
        {"status", std::string(to_string(record.status()))},
    };
    if (s.reference_answer) j["reference_answer"] = *s.reference_answer;
    if (const auto& r = record.reject_reason()) {
        j["reject_reason"] = {{"code", std::string(to_string(r->code))}, {"detail", r->detail}};
    }
    if (const auto& t = record.trace) {
        j["trace"] = {{"think_text", t->think_text},   {"answer_text", t->answer_text},
                      {"raw_text", t->raw_text},       {"token_count", t->token_count},
                      {"stray_text", t->stray_text}};
    }
    if (const auto& a = record.annotation) {
        j["annotation"] = {{"difficulty", a->difficulty}, {"quality", a->quality}, {"tags", a->tags}};
    }
    json prov = json::array();
    for (const auto& st : record.provenance) {
        prov.push_back({{"stage", st.stage}, {"config_hash", st.config_hash}, {"timestamp", st.timestamp}});
    }
    j["provenance"] = std::move(prov);
    try {
        return j.dump(-1, ' ', false, json::error_handler_t::strict);
    } catch (const json::type_error& e) {
        throw InvariantError("record", std::string("invalid UTF-8: ") + e.what());
    }
}

CuratedRecord decode_record(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DecodeError("line", std::string("malformed: ") + e.what());
    }
    if (!j.is_object()) throw DecodeError("line", "expected a JSON object");

    SeedSample seed;
    seed.id = require_string(j, "id");
    seed.source_dataset = optional_string(j, "source_dataset");
    seed.category = require_string(j, "category");
    seed.image_ref = optional_string(j, "image_ref");
    seed.instruction = require_string(j, "instruction");
    if (auto it = j.find("reference_answer"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw DecodeError("reference_answer", "expected string");
        seed.reference_answer = it->get<std::string>();
    }

    const Status status = j.contains("status") ? parse_status(require_string(j, "status")) : Status::Seeded;

    std::optional<RejectReason> reason;
    if (auto it = j.find("reject_reason"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw DecodeError("reject_reason", "expected object");
        reason = RejectReason{parse_reject_code(require_string(*it, "code", "reject_reason.")),
                              optional_string(*it, "detail", "reject_reason.")};
    }

    std::optional<DistilledTrace> trace;
    if (auto it = j.find("trace"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw DecodeError("trace", "expected object");
        DistilledTrace t;
        t.think_text = require_string(*it, "think_text", "trace.");
        t.answer_text = require_string(*it, "answer_text", "trace.");
        t.raw_text = require_string(*it, "raw_text", "trace.");
        const auto n = require_int(*it, "token_count", "trace.");
        if (n < 0) throw InvariantError("token_count", "must be nonnegative");
        t.token_count = static_cast<std::size_t>(n);
        if (auto s = it->find("stray_text"); s != it->end() && s->is_boolean()) t.stray_text = s->get<bool>();
        trace = std::move(t);
    }

    std::optional<Annotation> annotation;
    if (auto it = j.find("annotation"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw DecodeError("annotation", "expected object");
        Annotation a;
        a.difficulty = static_cast<int>(require_int(*it, "difficulty", "annotation."));
        a.quality = static_cast<int>(require_int(*it, "quality", "annotation."));
        const auto& tags = require(*it, "tags", "annotation.");
        if (!tags.is_array()) throw DecodeError("annotation.tags", "expected array");
        for (const auto& t : tags) {
            if (!t.is_string()) throw DecodeError("annotation.tags", "expected strings");
            a.tags.push_back(t.get<std::string>());
        }
        a.validate();
        annotation = std::move(a);
    }

    std::vector<StageStamp> provenance;
    if (auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw DecodeError("provenance", "expected array");
        for (const auto& p : *it) {
            if (!p.is_object()) throw DecodeError("provenance", "expected objects");
            provenance.push_back({require_string(p, "stage", "provenance."),
                                  optional_string(p, "config_hash", "provenance."),
                                  optional_string(p, "timestamp", "provenance.")});
        }
    }

    return CuratedRecord::restore(std::move(seed), std::move(trace), std::move(annotation), status,
                                  std::move(reason), std::move(provenance));
}

std::string stable_id(std::string_view source_dataset, std::string_view native_key) {
    if (source_dataset.empty()) throw InvariantError("source_dataset", "must be nonempty");
    if (native_key.empty()) throw InvariantError("native_key", "must be nonempty");
    std::string buf;
    buf.reserve(source_dataset.size() + native_key.size() + 16);
    buf.append(std::to_string(source_dataset.size()));
    buf.push_back(':');
    buf.append(source_dataset);
    buf.push_back('\x1f');
    buf.append(native_key);
    return sha256_hex(buf).substr(0, 32);
}

std::size_t PipelineManifest::total_rejects() const {
    std::size_t n = 0;
    for (const auto& [_, c] : reject_counts) n += c;
    return n;
}

void PipelineManifest::tally(RejectCode code, std::size_t n) {
    reject_counts[std::string(to_string(code))] += n;
}

std::string PipelineManifest::to_json_text() const {
    json j = {
        {"run_id", run_id},           {"stage", stage},
        {"config_hash", config_hash}, {"input_count", input_count},
        {"output_count", output_count}, {"reject_counts", reject_counts},
        {"random_seed", random_seed}, {"warnings", warnings},
    };
    return j.dump(2) + "\n";
}

PipelineManifest PipelineManifest::from_json_text(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DecodeError("manifest", e.what());
    }
    if (!j.is_object()) throw DecodeError("manifest", "expected object");
    PipelineManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.stage = j.at("stage").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.input_count = j.at("input_count").get<std::size_t>();
        m.output_count = j.at("output_count").get<std::size_t>();
        m.reject_counts = j.at("reject_counts").get<std::map<std::string, std::size_t>>();
        m.random_seed = j.at("random_seed").get<std::uint64_t>();
        if (j.contains("warnings")) m.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DecodeError("manifest", e.what());
    }
    return m;
}

}  // namespace cotc
