#pragma once

#include <cstdio>
#include <string>

namespace splatsim::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

Level level();
void set_level(Level lv);
Level parse_level(const std::string& name); // throws on unknown name

void write(Level lv, const std::string& msg);

inline void debug(const std::string& msg) { write(Level::debug, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }
inline void error(const std::string& msg) { write(Level::error, msg); }

} // namespace splatsim::log
