#include "lq/log.hpp"

#include <atomic>
#include <iostream>

namespace lq {
namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::kWarn)};
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_warn(std::string_view msg) {
  if (g_level >= static_cast<int>(LogLevel::kWarn)) std::cerr << "warning: " << msg << '\n';
}

void log_info(std::string_view msg) {
  if (g_level >= static_cast<int>(LogLevel::kInfo)) std::cerr << msg << '\n';
}

}  // namespace lq
