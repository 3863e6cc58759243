#pragma once

#include <filesystem>
#include <memory>

#include <spdlog/spdlog.h>

namespace dynrec {

/// Shared library logger ("dynrec"), stderr at warn by default.
std::shared_ptr<spdlog::logger> logger();

/// Threshold for the stderr sink.
void set_console_level(spdlog::level::level_enum level);

/// Mirrors the logger into `path` at info level for the object's lifetime.
class ScopedLogFile {
 public:
  explicit ScopedLogFile(const std::filesystem::path& path);
  ~ScopedLogFile();
  ScopedLogFile(const ScopedLogFile&) = delete;
  ScopedLogFile& operator=(const ScopedLogFile&) = delete;

 private:
  spdlog::sink_ptr sink_;
  spdlog::level::level_enum previous_;
};

}  // namespace dynrec
