#pragma once

#include <memory>
#include <string>

#include "phshape/cli.hpp"
#include "phshape/config.hpp"

namespace fixtures {

inline std::string config_path(const std::string& name) {
  return std::string(PHSHAPE_SOURCE_DIR) + "/configs/" + name;
}

inline const phshape::RunConfig& cartpole_config() {
  static const auto cfg = phshape::load_config(config_path("cartpole.json"));
  return cfg;
}

inline const phshape::RunConfig& acrobot_config() {
  static const auto cfg = phshape::load_config(config_path("acrobot.json"));
  return cfg;
}

// Synthesized once per process.
inline std::shared_ptr<const phshape::ShapedController> cartpole() {
  static const auto pkg = phshape::cli::synthesize(cartpole_config());
  return pkg.controller;
}

inline std::shared_ptr<const phshape::ShapedController> acrobot() {
  static const auto pkg = phshape::cli::synthesize(acrobot_config());
  return pkg.controller;
}

inline double max_abs(const phshape::Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace fixtures
