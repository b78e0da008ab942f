#pragma once

#include <cstddef>
#include <string_view>

namespace mxf::log {

enum class Level { kDebug = 0, kInfo, kWarn, kError };

void set_level(Level level);
void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

// Counters back the CLI exit-code contract.
std::size_t error_count();
std::size_t warning_count();
void reset_counts();

}  // namespace mxf::log
