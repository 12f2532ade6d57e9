#include "psyphy/append_log.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "psyphy/error.hpp"

namespace psyphy {

namespace {

[[noreturn]] void fail_errno(const std::string& what, const std::filesystem::path& path) {
    fail(ErrorCode::io_error, what + " " + path.string() + ": " + std::strerror(errno));
}

void write_fully(int fd, const char* data, std::size_t n, const std::filesystem::path& path) {
    while (n > 0) {
        const ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            fail_errno("write", path);
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

}  // namespace

AppendLog::AppendLog(std::filesystem::path path, std::size_t index_stride)
    : path_(std::move(path)), index_stride_(index_stride == 0 ? 1 : index_stride) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) fail_errno("open", path_);
    recover();
}

AppendLog::~AppendLog() {
    if (fd_ >= 0) ::close(fd_);
}

void AppendLog::recover() {
    const std::string content = read_all();
    std::size_t keep = content.size();
    if (!content.empty() && content.back() != '\n') {
        const auto last_nl = content.find_last_of('\n');
        keep = last_nl == std::string::npos ? 0 : last_nl + 1;
        if (::ftruncate(fd_, static_cast<off_t>(keep)) != 0) fail_errno("truncate", path_);
        if (::fsync(fd_) != 0) fail_errno("fsync", path_);
    }
    count_ = 0;
    stride_offsets_.clear();
    for (std::size_t i = 0; i < keep; ++i) {
        if (content[i] == '\n') {
            ++count_;
            if (count_ % index_stride_ == 0) stride_offsets_.push_back(i + 1);
        }
    }
    bytes_ = keep;
    if (::lseek(fd_, static_cast<off_t>(keep), SEEK_SET) < 0) fail_errno("seek", path_);
}

std::size_t AppendLog::append(const std::string& line) {
    if (line.find('\n') != std::string::npos) {
        fail(ErrorCode::invalid_input, "append log lines must not contain newlines");
    }
    std::lock_guard lock(mutex_);
    std::string buf = line;
    buf.push_back('\n');
    write_fully(fd_, buf.data(), buf.size(), path_);
    if (::fsync(fd_) != 0) fail_errno("fsync", path_);
    bytes_ += buf.size();
    const std::size_t ordinal = count_++;
    if (count_ % index_stride_ == 0) {
        stride_offsets_.push_back(bytes_);
        write_index();
    }
    return ordinal;
}

void AppendLog::write_index() {
    nlohmann::json idx{{"records", count_},
                       {"bytes", bytes_},
                       {"stride", index_stride_},
                       {"offsets", stride_offsets_}};
    const auto tmp = std::filesystem::path(path_.string() + ".idx.tmp");
    const auto dst = std::filesystem::path(path_.string() + ".idx");
    const std::string text = idx.dump() + '\n';
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) fail_errno("open", tmp);
    write_fully(fd, text.data(), text.size(), tmp);
    ::fsync(fd);
    ::close(fd);
    std::filesystem::rename(tmp, dst);
}

std::size_t AppendLog::record_count() const {
    std::lock_guard lock(mutex_);
    return count_;
}

std::string AppendLog::read_all() const {
    std::lock_guard lock(mutex_);
    std::ifstream in(path_, std::ios::binary);
    if (!in) return {};
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<std::string> AppendLog::read_lines() const {
    std::vector<std::string> lines;
    std::istringstream in(read_all());
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

}  // namespace psyphy
