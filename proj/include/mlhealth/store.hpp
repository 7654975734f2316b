#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "mlhealth/error.hpp"

namespace mlhealth {

using json = nlohmann::json;

struct LogEntry {
  std::uint64_t seq = 0;
  std::string kind;
  json record;

  bool operator==(const LogEntry&) const = default;
};

inline json to_json(const LogEntry& e) { return {{"seq", e.seq}, {"kind", e.kind}, {"record", e.record}}; }

/// Append-only JSON-lines event log. Every append is flushed and fsynced
/// before it returns; appends from concurrent threads are serialized.
class StoreLog {
 public:
  struct Recovery {
    std::vector<LogEntry> entries;
    std::vector<std::string> warnings;
    std::uintmax_t valid_bytes = 0;  // length of the well-formed prefix
  };

  /// Reads a log. A damaged final line is dropped with a warning; damage
  /// anywhere else is fatal and reports the 1-based line number.
  static Recovery read(const std::string& path) {
    Recovery out;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      if (!std::filesystem::exists(path)) return out;
      throw StoreError("cannot read store '" + path + "'");
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      ++line_no;
      auto nl = content.find('\n', pos);
      bool terminated = nl != std::string::npos;
      std::size_t end = terminated ? nl : content.size();
      std::string_view line(content.data() + pos, end - pos);
      bool last = !terminated || end + 1 >= content.size();
      std::optional<LogEntry> entry;
      std::string problem;
      if (!terminated) {
        problem = "unterminated line";
      } else {
        try {
          auto j = json::parse(line);
          entry = LogEntry{j.at("seq").get<std::uint64_t>(), j.at("kind").get<std::string>(), j.at("record")};
        } catch (const json::exception& e) {
          problem = e.what();
        }
      }
      if (entry && !out.entries.empty() && entry->seq <= out.entries.back().seq) {
        entry.reset();
        problem = "sequence number does not increase";
      }
      if (!entry) {
        if (!last) {
          throw StoreError("corrupt store '" + path + "' at line " + std::to_string(line_no) + ": " + problem);
        }
        out.warnings.push_back("discarding truncated final line " + std::to_string(line_no) + " of '" + path +
                               "' (" + problem + ")");
        break;
      }
      out.entries.push_back(std::move(*entry));
      pos = end + 1;
      out.valid_bytes = pos;
    }
    return out;
  }

  /// Opens (creating if needed) for appending after `last_seq`. A damaged
  /// tail beyond `valid_bytes` is cut off first.
  StoreLog(std::string path, std::uint64_t last_seq, std::uintmax_t valid_bytes) : path_(std::move(path)), seq_(last_seq) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(path_, ec) && std::filesystem::file_size(path_, ec) > valid_bytes) {
      std::filesystem::resize_file(path_, valid_bytes, ec);
      if (ec) throw StoreError("cannot truncate store '" + path_ + "': " + ec.message());
    }
    file_ = std::fopen(path_.c_str(), "ab");
    if (!file_) throw StoreError("cannot open store '" + path_ + "': " + std::strerror(errno));
  }

  StoreLog(const StoreLog&) = delete;
  StoreLog& operator=(const StoreLog&) = delete;

  ~StoreLog() {
    if (file_) std::fclose(file_);
  }

  /// Writes one record and returns its sequence number once durable.
  std::uint64_t append(const std::string& kind, const json& record) {
    std::lock_guard lock(mu_);
    LogEntry e{seq_ + 1, kind, record};
    std::string line = to_json(e).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
        ::fsync(::fileno(file_)) != 0) {
      throw StoreError("write to store '" + path_ + "' failed: " + std::strerror(errno));
    }
    return ++seq_;
  }

  std::uint64_t last_seq() const {
    std::lock_guard lock(mu_);
    return seq_;
  }

  const std::string& path() const { return path_; }

  void flush() {
    std::lock_guard lock(mu_);
    std::fflush(file_);
    ::fsync(::fileno(file_));
  }

 private:
  std::string path_;
  std::FILE* file_ = nullptr;
  std::uint64_t seq_ = 0;
  mutable std::mutex mu_;
};

}  // namespace mlhealth
