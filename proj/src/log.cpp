#include "ivvi/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ivvi::log {
namespace {

std::atomic<Level> g_level{Level::kWarning};
std::mutex g_mutex;

void emit(Level lvl, const char* tag, const std::string& msg) {
  if (lvl < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::clog << "[" << tag << "] " << msg << '\n';
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void info(const std::string& msg) { emit(Level::kInfo, "info", msg); }
void warning(const std::string& msg) { emit(Level::kWarning, "warn", msg); }

}  // namespace ivvi::log
