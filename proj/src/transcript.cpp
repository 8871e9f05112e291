#include "promptloom/transcript.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "promptloom/serialize.hpp"

namespace promptloom {

namespace {

std::string sys_error(const std::string& what, const std::string& path) {
  return what + " '" + path + "': " + std::strerror(errno);
}

class LockedFile {
 public:
  explicit LockedFile(const std::string& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError(sys_error("cannot open transcript", path));
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoError(sys_error("cannot lock transcript", path));
    }
  }
  ~LockedFile() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  LockedFile(const LockedFile&) = delete;
  LockedFile& operator=(const LockedFile&) = delete;

  std::string read_all() const {
    std::string out;
    char buf[65536];
    off_t off = 0;
    for (;;) {
      ssize_t n = ::pread(fd_, buf, sizeof buf, off);
      if (n < 0) throw IoError(sys_error("cannot read transcript", path_));
      if (n == 0) break;
      out.append(buf, static_cast<std::size_t>(n));
      off += n;
    }
    return out;
  }

  void write_all(const std::string& data) const {
    std::size_t done = 0;
    while (done < data.size()) {
      ssize_t n = ::write(fd_, data.data() + done, data.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(sys_error("cannot write transcript", path_));
      }
      done += static_cast<std::size_t>(n);
    }
  }

 private:
  std::string path_;
  int fd_ = -1;
};

// Largest seq among complete, well-formed lines.
std::uint64_t last_seq(const std::string& content) {
  std::uint64_t best = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto nl = content.find('\n', start);
    if (nl == std::string::npos) break;
    auto j = Json::parse(content.begin() + static_cast<std::ptrdiff_t>(start),
                         content.begin() + static_cast<std::ptrdiff_t>(nl), nullptr, false);
    if (j.is_object() && j.contains("seq") && j["seq"].is_number_unsigned()) {
      best = std::max(best, j["seq"].get<std::uint64_t>());
    }
    start = nl + 1;
  }
  return best;
}

}  // namespace

std::string transcript_line(std::uint64_t seq, const std::string& chain_id,
                            const RunRecord& record) {
  Json j = to_json(record);
  j["seq"] = seq;
  j["chainId"] = chain_id;
  return j.dump();
}

std::uint64_t append_transcript(const std::string& path, const std::string& chain_id,
                                const RunRecord& record) {
  LockedFile f(path);
  const std::string content = f.read_all();
  const std::uint64_t seq = last_seq(content) + 1;
  std::string line;
  // A torn tail from a crashed writer must not swallow the new record.
  if (!content.empty() && content.back() != '\n') line += '\n';
  line += transcript_line(seq, chain_id, record);
  line += '\n';
  f.write_all(line);
  return seq;
}

TranscriptRead read_transcript(const std::string& path,
                               const std::optional<std::string>& chain_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open transcript '" + path + "'");
  TranscriptRead out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw Error("not valid JSON");
      if (!j.is_object() || !j.contains("seq") || !j["seq"].is_number_unsigned()) {
        throw Error("missing seq");
      }
      if (!j.contains("chainId") || !j["chainId"].is_string()) throw Error("missing chainId");
      TranscriptRecord rec;
      rec.seq = j["seq"].get<std::uint64_t>();
      rec.chain_id = j["chainId"].get<std::string>();
      if (chain_id && rec.chain_id != *chain_id) continue;
      rec.record = record_from_json(j);
      out.records.push_back(std::move(rec));
    } catch (const Error& e) {
      out.warnings.push_back("line " + std::to_string(line_no) + " skipped: " + e.what());
    }
  }
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const TranscriptRecord& a, const TranscriptRecord& b) { return a.seq < b.seq; });
  return out;
}

}  // namespace promptloom
