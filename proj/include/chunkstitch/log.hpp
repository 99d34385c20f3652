#pragma once

#include <functional>
#include <string>

namespace chunkstitch {

enum class LogLevel { Debug, Info, Warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Replaces the process-wide sink and returns the previous one. The default
/// sink writes warnings and info lines to stderr.
LogSink set_log_sink(LogSink sink);
void set_log_level(LogLevel min_level);

void log_message(LogLevel level, const std::string& message);
inline void log_info(const std::string& m) { log_message(LogLevel::Info, m); }
inline void log_warning(const std::string& m) { log_message(LogLevel::Warning, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::Debug, m); }

}  // namespace chunkstitch
