#include "log.hpp"

#include <algorithm>

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>

namespace dynrec {

namespace {
spdlog::level::level_enum console_level = spdlog::level::warn;
}

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("dynrec");
    if (existing) return existing;
    auto l = spdlog::stderr_color_mt("dynrec");
    l->set_pattern("[%l] %v");
    l->sinks().front()->set_level(console_level);
    l->set_level(console_level);
    return l;
  }();
  return instance;
}

void set_console_level(spdlog::level::level_enum level) {
  console_level = level;
  auto l = logger();
  l->sinks().front()->set_level(level);
  l->set_level(std::min(level, l->sinks().size() > 1 ? spdlog::level::info : level));
}

ScopedLogFile::ScopedLogFile(const std::filesystem::path& path) {
  auto l = logger();
  previous_ = l->level();
  sink_ = std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string(), true);
  sink_->set_pattern("[%l] %v");
  sink_->set_level(spdlog::level::info);
  l->sinks().push_back(sink_);
  l->set_level(std::min(previous_, spdlog::level::info));
}

ScopedLogFile::~ScopedLogFile() {
  auto l = logger();
  l->flush();
  auto& sinks = l->sinks();
  sinks.erase(std::remove(sinks.begin(), sinks.end(), sink_), sinks.end());
  l->set_level(previous_);
}

}  // namespace dynrec
