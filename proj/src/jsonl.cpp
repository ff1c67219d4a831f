#include "cotc/jsonl.hpp"

#include <sstream>

#include "cotc/error.hpp"
#include "cotc/text.hpp"

namespace cotc {

void for_each_line(const fs::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorFamily::Input, "cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        fn(line, lineno);
    }
}

std::vector<CuratedRecord> read_records(const fs::path& path) {
    std::vector<CuratedRecord> out;
    for_each_line(path, [&](std::string_view line, std::size_t lineno) {
        try {
            out.push_back(decode_record(line));
        } catch (const Error& e) {
            throw Error(ErrorFamily::Input, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

AtomicWriter::AtomicWriter(fs::path path) : path_(std::move(path)) {
    tmp_ = path_;
    tmp_ += ".tmp";
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorFamily::Input, "cannot write " + tmp_.string());
}

AtomicWriter::~AtomicWriter() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        fs::remove(tmp_, ec);
    }
}

void AtomicWriter::write_line(std::string_view line) {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
}

void AtomicWriter::write(std::string_view text) {
    out_.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void AtomicWriter::commit() {
    out_.flush();
    if (!out_) throw Error(ErrorFamily::Input, "write failed for " + tmp_.string());
    out_.close();
    fs::rename(tmp_, path_);
    committed_ = true;
}

void write_records_atomic(const fs::path& path, const std::vector<CuratedRecord>& records) {
    AtomicWriter w(path);
    for (const auto& r : records) w.write_line(encode_record(r));
    w.commit();
}

void write_text_atomic(const fs::path& path, std::string_view text) {
    AtomicWriter w(path);
    w.write(text);
    w.commit();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorFamily::MissingArtifact, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cotc
