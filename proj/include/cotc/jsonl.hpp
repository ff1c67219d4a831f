#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cotc/record.hpp"

namespace cotc {

namespace fs = std::filesystem;

// Calls `fn(line, line_number)` for every non-blank line (1-based numbers).
void for_each_line(const fs::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

// Decodes every record in `path`; errors carry "file:line".
std::vector<CuratedRecord> read_records(const fs::path& path);

// Writes to "<path>.tmp" and renames onto `path` on commit(). An uncommitted
// writer removes its temporary file, so readers never observe partial output.
class AtomicWriter {
public:
    explicit AtomicWriter(fs::path path);
    ~AtomicWriter();
    AtomicWriter(const AtomicWriter&) = delete;
    AtomicWriter& operator=(const AtomicWriter&) = delete;

    void write_line(std::string_view line);
    void write(std::string_view text);
    void commit();

private:
    fs::path path_;
    fs::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_records_atomic(const fs::path& path, const std::vector<CuratedRecord>& records);
void write_text_atomic(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

}  // namespace cotc
