#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace psyphy {

// Append-only JSON Lines file. append() returns only after the line has been
// written and fsync'd. Opening an existing file drops a torn trailing line
// left by a crash, then continues appending after the last complete record.
// Every `index_stride` records an index file (<path>.idx) is rewritten with
// the record count and byte offset of each stride boundary.
class AppendLog {
public:
    explicit AppendLog(std::filesystem::path path, std::size_t index_stride = 256);
    ~AppendLog();

    AppendLog(const AppendLog&) = delete;
    AppendLog& operator=(const AppendLog&) = delete;

    // `line` must not contain a newline; one is appended. Returns the record
    // ordinal (0-based).
    std::size_t append(const std::string& line);

    std::size_t record_count() const;
    std::vector<std::string> read_lines() const;
    std::string read_all() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void recover();
    void write_index();

    std::filesystem::path path_;
    std::size_t index_stride_;
    int fd_ = -1;
    std::size_t count_ = 0;
    std::uint64_t bytes_ = 0;
    std::vector<std::uint64_t> stride_offsets_;
    mutable std::mutex mutex_;
};

}  // namespace psyphy
