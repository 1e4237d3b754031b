#pragma once

#include <string>

namespace cyclevc {

// CYCLEVC_LOG={quiet,info,debug}; default info. Messages go to stderr so
// report output on stdout stays machine-readable.
enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace cyclevc
