#pragma once

#include <string>

namespace ivvi::log {

enum class Level { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();

void info(const std::string& msg);
void warning(const std::string& msg);

}  // namespace ivvi::log
