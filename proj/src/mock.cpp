#include "cotc/mock.hpp"

#include <cmath>
#include <sstream>

#include "cotc/hash.hpp"
#include "cotc/jsonl.hpp"
#include "cotc/random.hpp"
#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

namespace {

constexpr std::string_view kTeacherMarker = "### Output Format (Strictly Enforced)";
constexpr std::string_view kReaskMarker = "could not be parsed";

constexpr const char* kVocab[] = {
    "the",      "image",     "shows",     "a",         "region",    "near",      "left",
    "right",    "upper",     "lower",     "corner",    "value",     "label",     "axis",
    "bar",      "line",      "compare",   "largest",   "smallest",  "between",   "two",
    "three",    "four",      "five",      "objects",   "person",    "table",     "chart",
    "circle",   "angle",     "equals",    "degrees",   "radius",    "therefore", "because",
    "since",    "so",        "we",        "count",     "visible",   "items",     "each",
    "color",    "red",       "blue",      "green",     "shape",     "square",    "triangle",
    "question", "asks",      "which",     "option",    "matches",   "first",     "second",
    "step",     "identify",  "check",     "result",    "consistent", "with",     "evidence",
    "text",     "reads",     "title",     "legend",    "indicates", "trend",     "increases",
    "decreases", "total",    "sum",       "ratio",     "percent",   "roughly",   "exactly",
    "scene",    "background", "foreground", "relation", "above",    "below",     "inside",
    "outside",  "other",     "remaining", "only",      "one",       "all",       "none",
    "conclude", "answer",    "correct",   "given",     "known",     "formula",   "compute",
    "area",     "length",    "width",     "height",    "number",    "points",    "curve",
    "highest",  "lowest",    "center",    "edge",      "pattern",   "feature",   "detail",
};

constexpr const char* kAnswers[] = {"A", "B", "C", "D", "yes", "no", "3", "7", "12", "blue", "left", "ionic"};

struct TagPrior {
    const char* tag;
    int per_mille;
};
constexpr TagPrior kTagPriors[] = {
    {"reasoning", 850}, {"object", 750}, {"scene", 450}, {"count", 380}, {"text", 370},
    {"math", 330},      {"spatial", 150}, {"position", 120}, {"chart", 120}, {"graph", 90},
    {"counting", 80},   {"geometry", 70}, {"comparison", 60},
};

std::string words(Rng& rng, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out.push_back(i % 11 == 10 ? '\n' : ' ');
        out += kVocab[uniform_below(rng, std::size(kVocab))];
    }
    return out;
}

std::string synth_trace(std::uint64_t h) {
    Rng rng(h);
    const std::string answer = kAnswers[uniform_below(rng, std::size(kAnswers))];
    const auto roll = h % 100;
    if (roll < 5) return "The answer is " + answer + ", as the picture makes clear.";
    if (roll < 8) return "<think>It is obvious.</think>\n<answer>" + answer + "</answer>";
    std::string think = words(rng, 30 + uniform_below(rng, 90));
    if (roll < 10) think = "[insert reasoning here] " + think;
    if (roll >= 10 && roll < 13) {
        const auto mid = think.size() / 3;
        const auto cut = think.find(' ', mid);
        think.insert(cut == std::string::npos ? mid : cut, " scratch that,");
    }
    return "<think>\n" + think + "\n</think>\n<answer>\n" + answer + "\n</answer>";
}

std::string synth_score(std::uint64_t h, bool reask) {
    Rng rng(h);
    if (!reask && h % 20 == 0) return "This response looks fairly good and moderately hard to me.";
    const auto d_roll = uniform_below(rng, 1000);
    const int difficulty = d_roll < 1 ? 1 : d_roll < 237 ? 2 : d_roll < 702 ? 3 : d_roll < 998 ? 4 : 5;
    const auto q_roll = uniform_below(rng, 1000);
    const int quality = q_roll < 915 ? 5 : q_roll < 979 ? 4 : 3;
    json tags = json::array();
    for (const auto& p : kTagPriors) {
        if (uniform_below(rng, 1000) < static_cast<std::uint64_t>(p.per_mille)) {
            std::string t = p.tag;
            if (uniform_below(rng, 10) == 0) t[0] = static_cast<char>(t[0] - 'a' + 'A');
            if (uniform_below(rng, 10) == 0) t = " " + t;
            tags.push_back(t);
        }
    }
    if (tags.empty()) tags.push_back("reasoning");
    const json obj = {{"difficulty", difficulty}, {"quality", quality}, {"tags", tags}};
    switch (uniform_below(rng, 3)) {
        case 0: return obj.dump();
        case 1: return "```json\n" + obj.dump(2) + "\n```";
        default: return "Here is my assessment:\n" + obj.dump();
    }
}

std::string message_text(const json& msg) {
    const auto& c = msg.at("content");
    if (c.is_string()) return c.get<std::string>();
    std::string out;
    for (const auto& part : c) {
        if (part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
}

HttpResult not_found(const std::string& hash, const std::string& what) {
    json err = {{"error", {{"type", "fixture_not_found"}, {"request_hash", hash}, {"message", what}}}};
    return {404, err.dump()};
}

std::vector<double> normalized(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return v;
}

}  // namespace

std::vector<double> hashed_unit_vector(std::string_view text, std::size_t dim) {
    Rng rng(sha256_u64(text));
    std::vector<double> v(dim);
    for (double& x : v) x = standard_normal(rng);
    return normalized(std::move(v));
}

MockEndpoint::MockEndpoint(MockOptions options) : options_(options) {}

std::shared_ptr<MockEndpoint> MockEndpoint::load(const std::filesystem::path& dir) {
    MockOptions opts;
    auto endpoint = std::make_shared<MockEndpoint>(opts);
    if (dir.empty()) return endpoint;
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorFamily::Input, "mock fixture directory not found: " + dir.string());
    }
    const auto fail = [&](const std::string& file, const std::string& what) {
        throw Error(ErrorFamily::Input, "fixture parse failure in " + (dir / file).string() + ": " + what);
    };
    if (std::filesystem::exists(dir / "mock.json")) {
        try {
            const json j = json::parse(read_text(dir / "mock.json"));
            if (auto f = j.find("fallback"); f != j.end()) {
                opts.teacher_fallback = f->value("teacher", opts.teacher_fallback);
                opts.scorer_fallback = f->value("scorer", opts.scorer_fallback);
                opts.embedding_fallback = f->value("embeddings", opts.embedding_fallback);
            }
            opts.embedding_dim = j.value("embedding_dim", opts.embedding_dim);
        } catch (const json::exception& e) {
            fail("mock.json", e.what());
        }
        if (opts.embedding_dim == 0) fail("mock.json", "embedding_dim must be positive");
        endpoint->options_ = opts;
    }
    if (std::filesystem::exists(dir / "responses.jsonl")) {
        for_each_line(dir / "responses.jsonl", [&](std::string_view line, std::size_t lineno) {
            try {
                const json j = json::parse(line);
                ChatResponse r;
                r.text = j.at("text").get<std::string>();
                const auto fr = j.value("finish_reason", std::string("stop"));
                r.finish_reason = fr == "length" ? FinishReason::Length : FinishReason::Stop;
                endpoint->add_response(j.at("request_hash").get<std::string>(), std::move(r));
            } catch (const json::exception& e) {
                fail("responses.jsonl", "line " + std::to_string(lineno) + ": " + e.what());
            }
        });
    }
    if (std::filesystem::exists(dir / "embeddings.jsonl")) {
        for_each_line(dir / "embeddings.jsonl", [&](std::string_view line, std::size_t lineno) {
            try {
                const json j = json::parse(line);
                auto text = j.at("text").get<std::string>();
                if (j.contains("vector")) {
                    auto v = j.at("vector").get<std::vector<double>>();
                    if (v.size() != endpoint->options_.embedding_dim) {
                        fail("embeddings.jsonl", "line " + std::to_string(lineno) + ": vector dimension " +
                                                     std::to_string(v.size()) + " != embedding_dim");
                    }
                    endpoint->add_embedding(std::move(text), std::move(v));
                } else {
                    endpoint->add_alias(std::move(text), j.at("alias_of").get<std::string>(),
                                        j.value("perturb", 0.0));
                }
            } catch (const json::exception& e) {
                fail("embeddings.jsonl", "line " + std::to_string(lineno) + ": " + e.what());
            }
        });
    }
    return endpoint;
}

void MockEndpoint::add_response(std::string request_hash, ChatResponse response) {
    responses_[std::move(request_hash)] = std::move(response);
}

void MockEndpoint::add_embedding(std::string text, std::vector<double> vector) {
    embeddings_[std::move(text)] = std::move(vector);
}

void MockEndpoint::add_alias(std::string text, std::string alias_of, double perturb) {
    aliases_[std::move(text)] = {std::move(alias_of), perturb};
}

std::vector<double> MockEndpoint::resolve_embedding(const std::string& text, int depth) const {
    if (auto it = embeddings_.find(text); it != embeddings_.end()) return it->second;
    if (auto it = aliases_.find(text); it != aliases_.end() && depth < 16) {
        auto base = resolve_embedding(it->second.first, depth + 1);
        if (base.empty()) return {};
        const auto noise = hashed_unit_vector("perturb:" + text, options_.embedding_dim);
        for (std::size_t i = 0; i < base.size(); ++i) base[i] += it->second.second * noise[i];
        return normalized(std::move(base));
    }
    if (!options_.embedding_fallback) return {};
    return hashed_unit_vector(text, options_.embedding_dim);
}

std::vector<double> MockEndpoint::embedding_for(const std::string& text) const {
    return resolve_embedding(text, 0);
}

HttpResult MockEndpoint::handle(const std::string& path, const std::string& body) const {
    if (path == kChatPath) return handle_chat(body);
    if (path == kEmbeddingsPath) return handle_embeddings(body);
    return {404, json{{"error", {{"type", "unknown_path"}, {"message", path}}}}.dump()};
}

HttpResult MockEndpoint::handle_chat(const std::string& body) const {
    json req;
    try {
        req = json::parse(body);
    } catch (const json::exception& e) {
        return {400, json{{"error", {{"type", "bad_request"}, {"message", e.what()}}}}.dump()};
    }
    const std::string canonical = req.dump(-1, ' ', false, json::error_handler_t::replace);
    const std::string hash = sha256_hex(canonical);
    if (auto it = responses_.find(hash); it != responses_.end()) return {200, chat_response_body(it->second)};

    std::string all_text;
    std::string last_user;
    try {
        for (const auto& m : req.at("messages")) {
            const auto t = message_text(m);
            all_text += t;
            all_text.push_back('\n');
            if (m.value("role", "") == "user") last_user = t;
        }
    } catch (const json::exception& e) {
        return {400, json{{"error", {{"type", "bad_request"}, {"message", e.what()}}}}.dump()};
    }
    const std::uint64_t h = sha256_u64(canonical);
    ChatResponse r;
    if (options_.teacher_fallback && all_text.find(kTeacherMarker) != std::string::npos) {
        r.text = synth_trace(h);
    } else if (options_.scorer_fallback && all_text.find("\"difficulty\"") != std::string::npos &&
               all_text.find("\"quality\"") != std::string::npos) {
        r.text = synth_score(h, last_user.find(kReaskMarker) != std::string::npos);
    } else {
        return not_found(hash, "no fixture and no fallback for this request");
    }
    r.usage = Usage{static_cast<std::int64_t>(all_text.size() / 4), static_cast<std::int64_t>(r.text.size() / 4)};
    return {200, chat_response_body(r)};
}

HttpResult MockEndpoint::handle_embeddings(const std::string& body) const {
    json req;
    try {
        req = json::parse(body);
    } catch (const json::exception& e) {
        return {400, json{{"error", {{"type", "bad_request"}, {"message", e.what()}}}}.dump()};
    }
    const auto input = req.value("input", json::array());
    if (!input.is_array()) return {400, R"({"error":{"type":"bad_request","message":"input must be a list"}})"};
    json data = json::array();
    for (std::size_t i = 0; i < input.size(); ++i) {
        const auto text = input[i].is_string() ? input[i].get<std::string>() : input[i].dump();
        auto v = embedding_for(text);
        if (v.empty()) return not_found(sha256_hex(text), "no embedding fixture for '" + text + "'");
        data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", std::move(v)}});
    }
    return {200, json{{"object", "list"}, {"data", std::move(data)}}.dump()};
}

ScriptedFaultTransport::ScriptedFaultTransport(std::shared_ptr<Transport> inner, std::vector<int> script)
    : inner_(std::move(inner)), script_(script.begin(), script.end()) {}

HttpResult ScriptedFaultTransport::post(const std::string& path, const std::string& body) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
        if (!script_.empty()) {
            const int status = script_.front();
            script_.pop_front();
            if (status == 0) return {0, "injected transport failure"};
            return {status, R"({"error":{"type":"injected"}})"};
        }
    }
    return inner_->post(path, body);
}

std::size_t ScriptedFaultTransport::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

}  // namespace cotc
