#include "cyclevc/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace cyclevc {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CYCLEVC_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    if (std::strcmp(env, "quiet") == 0) return LogLevel::kQuiet;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::fprintf(stderr, "[cyclevc] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug)
    std::fprintf(stderr, "[cyclevc:debug] %s\n", msg.c_str());
}

}  // namespace cyclevc
