#include "chunkstitch/log.hpp"

#include <iostream>
#include <mutex>

namespace chunkstitch {

namespace {

std::mutex g_mutex;
LogLevel g_level = LogLevel::Info;

void stderr_sink(LogLevel level, const std::string& message) {
  const char* tag = level == LogLevel::Warning ? "warning" : level == LogLevel::Info ? "info" : "debug";
  std::cerr << "[" << tag << "] " << message << '\n';
}

LogSink& sink() {
  static LogSink s = stderr_sink;
  return s;
}

}  // namespace

LogSink set_log_sink(LogSink new_sink) {
  std::lock_guard lock(g_mutex);
  LogSink previous = std::move(sink());
  sink() = new_sink ? std::move(new_sink) : LogSink(stderr_sink);
  return previous;
}

void set_log_level(LogLevel min_level) {
  std::lock_guard lock(g_mutex);
  g_level = min_level;
}

void log_message(LogLevel level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (level < g_level) return;
  sink()(level, message);
}

}  // namespace chunkstitch
