#include "splatsim/log.hpp"

#include <atomic>
#include <stdexcept>

namespace splatsim::log {

namespace {
std::atomic<Level> g_level{Level::info};

const char* tag(Level lv) {
    switch (lv) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    }
    return "?";
}
} // namespace

Level level() { return g_level.load(std::memory_order_relaxed); }
void set_level(Level lv) { g_level.store(lv, std::memory_order_relaxed); }

Level parse_level(const std::string& name) {
    if (name == "debug") return Level::debug;
    if (name == "info") return Level::info;
    if (name == "warn") return Level::warn;
    if (name == "error") return Level::error;
    throw std::runtime_error("unknown log level: " + name);
}

void write(Level lv, const std::string& msg) {
    if (static_cast<int>(lv) < static_cast<int>(level())) return;
    std::fprintf(stderr, "[%s] %s\n", tag(lv), msg.c_str());
}

} // namespace splatsim::log
