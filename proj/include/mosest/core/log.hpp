#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace mosest::log {

enum class Level : int { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

inline std::atomic<int>& threshold() {
  static std::atomic<int> level{static_cast<int>(Level::kInfo)};
  return level;
}

inline void set_level(Level level) { threshold().store(static_cast<int>(level)); }

inline void write(Level level, std::string_view msg) {
  if (static_cast<int>(level) < threshold().load()) return;
  static std::mutex mu;
  static constexpr std::string_view kTags[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(mu);
  std::clog << "[mosest " << kTags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void debug(std::string_view msg) { write(Level::kDebug, msg); }
inline void info(std::string_view msg) { write(Level::kInfo, msg); }
inline void warn(std::string_view msg) { write(Level::kWarn, msg); }
inline void error(std::string_view msg) { write(Level::kError, msg); }

}  // namespace mosest::log
