#include "motionxfer/log.hpp"

#include <atomic>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace mxf::log {
namespace {

std::atomic<std::size_t> g_errors{0};
std::atomic<std::size_t> g_warnings{0};

spdlog::logger& sink() {
  static const auto logger = [] {
    auto l = spdlog::stderr_logger_mt("motionxfer");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return *logger;
}

spdlog::level::level_enum to_spdlog(Level level) {
  switch (level) {
    case Level::kDebug: return spdlog::level::debug;
    case Level::kInfo: return spdlog::level::info;
    case Level::kWarn: return spdlog::level::warn;
    case Level::kError: return spdlog::level::err;
  }
  return spdlog::level::info;
}

}  // namespace

void set_level(Level level) { sink().set_level(to_spdlog(level)); }
void debug(std::string_view msg) { sink().debug(msg); }
void info(std::string_view msg) { sink().info(msg); }
void warn(std::string_view msg) {
  ++g_warnings;
  sink().warn(msg);
}
void error(std::string_view msg) {
  ++g_errors;
  sink().error(msg);
}
std::size_t error_count() { return g_errors.load(); }
std::size_t warning_count() { return g_warnings.load(); }
void reset_counts() {
  g_errors = 0;
  g_warnings = 0;
}

}  // namespace mxf::log
