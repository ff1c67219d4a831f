#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "cotc/random.hpp"
#include "cotc/record.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("cotc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline const fs::path& fixture_dir() {
    static const fs::path p = fs::path(COTC_SOURCE_DIR) / "tests" / "fixtures";
    return p;
}

inline std::string random_word(cotc::Rng& rng, std::size_t min_len = 1, std::size_t max_len = 8) {
    static const char* alphabet = "abcdefghijklmnopqrstuvwxyz";
    const auto len = min_len + cotc::uniform_below(rng, max_len - min_len + 1);
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w.push_back(alphabet[cotc::uniform_below(rng, 26)]);
    return w;
}

inline std::string random_words(cotc::Rng& rng, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s.push_back(' ');
        s += random_word(rng);
    }
    return s;
}

inline cotc::SeedSample random_seed_sample(cotc::Rng& rng, const std::string& id) {
    cotc::SeedSample s;
    s.id = id;
    s.source_dataset = "gen";
    s.category = "c" + std::to_string(cotc::uniform_below(rng, 5));
    s.image_ref = cotc::uniform_below(rng, 4) == 0 ? "" : "img/" + random_word(rng) + ".png";
    s.instruction = random_words(rng, 1 + cotc::uniform_below(rng, 12));
    if (cotc::uniform_below(rng, 2)) s.reference_answer = random_words(rng, 1 + cotc::uniform_below(rng, 3));
    return s;
}

inline cotc::Annotation random_annotation(cotc::Rng& rng, const std::vector<std::string>& vocab) {
    std::vector<std::string> tags;
    const auto n = 1 + cotc::uniform_below(rng, 3);
    for (std::size_t i = 0; i < n; ++i) tags.push_back(vocab[cotc::uniform_below(rng, vocab.size())]);
    return cotc::Annotation::make(1 + static_cast<int>(cotc::uniform_below(rng, 5)),
                                  1 + static_cast<int>(cotc::uniform_below(rng, 5)), tags);
}

inline cotc::DistilledTrace simple_trace(const std::string& think, const std::string& answer) {
    cotc::DistilledTrace t;
    t.think_text = think;
    t.answer_text = answer;
    t.raw_text = "<think>\n" + think + "\n</think>\n<answer>\n" + answer + "\n</answer>";
    std::size_t tokens = 0;
    bool in_word = false;
    for (char c : think) {
        const bool space = c == ' ' || c == '\n' || c == '\t';
        if (!space && !in_word) ++tokens;
        in_word = !space;
    }
    t.token_count = tokens;
    return t;
}

// An Annotated record with a trace and the given scores.
inline cotc::CuratedRecord annotated_record(const std::string& id, int difficulty, int quality,
                                            std::vector<std::string> tags) {
    cotc::SeedSample s;
    s.id = id;
    s.source_dataset = "gen";
    s.category = "c";
    s.instruction = "question " + id;
    cotc::CuratedRecord r(s);
    r.trace = simple_trace("step one then step two gives the result", "42");
    r.advance(cotc::Status::Distilled);
    r.annotation = cotc::Annotation::make(difficulty, quality, tags);
    r.advance(cotc::Status::Annotated);
    return r;
}

inline std::string padded_id(std::size_t i, std::size_t width = 5) {
    std::string s = std::to_string(i);
    return "r" + std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

}  // namespace testing
