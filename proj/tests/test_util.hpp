#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "mlhealth/profile.hpp"
#include "mlhealth/schema.hpp"
#include "mlhealth/table.hpp"

namespace mlhealth::testing {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mlhealth-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

/// Skewed categorical column "plan" (x:70, y:20, z:10) plus numeric "load" 0..9.
inline DataTable skewed_table() {
  DataTable t({"plan", "load"});
  for (int i = 0; i < 100; ++i) {
    std::string plan = i < 70 ? "x" : (i < 90 ? "y" : "z");
    t.add_row({Cell{plan}, Cell{static_cast<double>(i % 10)}});
  }
  return t;
}

inline TrainingProfile skewed_profile(const std::string& model_id, TimestampMs created_at = 0) {
  auto t = skewed_table();
  auto schemas = infer_schema(t);
  return build_profile(t, schemas, model_id, {}, created_at);
}

/// Every row in the rarest plan with an out-of-range load.
inline DataTable drifted_table(std::size_t rows = 50) {
  DataTable t({"plan", "load"});
  for (std::size_t i = 0; i < rows; ++i) t.add_row({Cell{std::string("z")}, Cell{100.0}});
  return t;
}

}  // namespace mlhealth::testing
