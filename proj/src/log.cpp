#include "phshape/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace phshape::log {
namespace {

Level from_env() {
  const char* env = std::getenv("PH_SHAPE_LOG");
  if (env == nullptr) return Level::Warn;
  const std::string v(env);
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(from_env())};
  return lvl;
}

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

Level level() { return static_cast<Level>(current().load()); }

void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }

void write(Level lvl, std::string_view msg) {
  std::fprintf(stderr, "[%s] %.*s\n", kNames[static_cast<int>(lvl)], static_cast<int>(msg.size()),
               msg.data());
}

}  // namespace phshape::log
