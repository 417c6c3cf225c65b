#ifndef CRITSEL_LOG_HPP
#define CRITSEL_LOG_HPP

#include <string>

namespace critsel {
namespace log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Threshold comes from the CRITSEL_LOG environment variable
// (error|warn|info|debug); unset or unrecognized means warn.
Level threshold();
void set_threshold(Level level);

// Diagnostics go to stderr only; results belong on stdout or in files.
void write(Level level, const std::string& msg);

inline void error(const std::string& msg) { write(Level::kError, msg); }
inline void warn(const std::string& msg) { write(Level::kWarn, msg); }
inline void info(const std::string& msg) { write(Level::kInfo, msg); }
inline void debug(const std::string& msg) { write(Level::kDebug, msg); }

}  // namespace log
}  // namespace critsel

#endif  // CRITSEL_LOG_HPP
