#include "critsel/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace critsel {
namespace log {

namespace {

Level parse_env() {
  const char* env = std::getenv("CRITSEL_LOG");
  if (!env) return Level::kWarn;
  std::string v(env);
  if (v == "error") return Level::kError;
  if (v == "warn") return Level::kWarn;
  if (v == "info") return Level::kInfo;
  if (v == "debug") return Level::kDebug;
  return Level::kWarn;
}

Level g_threshold = parse_env();
std::mutex g_mutex;

const char* prefix(Level level) {
  switch (level) {
    case Level::kError: return "error";
    case Level::kWarn: return "warning";
    case Level::kInfo: return "info";
    case Level::kDebug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return g_threshold; }

void set_threshold(Level level) { g_threshold = level; }

void write(Level level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(g_threshold)) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fprintf(stderr, "[critsel %s] %s\n", prefix(level), msg.c_str());
}

}  // namespace log
}  // namespace critsel
