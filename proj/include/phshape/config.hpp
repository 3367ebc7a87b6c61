#pragma once

#include <filesystem>
#include <string>

#include "phshape/controller.hpp"
#include "phshape/potential.hpp"
#include "phshape/sim.hpp"
#include "phshape/systems.hpp"

namespace phshape {

/// How m_a11(q_i) is chosen: a constant block, or so that M^{-1} + M_a^{-1}
/// stays equal to a target M_d^{-1}.
struct FreeFunctionConfig {
  std::string kind = "constant";
  Mat value;   ///< kind "constant"
  Mat md_inv;  ///< kind "target_Md"
};

struct SynthesisConfig {
  AddedMassState init;
  FreeFunctionConfig free;
  std::pair<double, double> range{-1.0, 1.0};
  KeSynthesisOptions options;
};

struct SimulationConfig {
  PhaseState init;
  double t_final = 5.0;
  SimOptions options;
};

/// A full run: plant, matching, potential, damping and simulation settings.
struct RunConfig {
  std::string system;
  systems::Params params;
  SynthesisConfig synthesis;
  PotentialSpec potential;
  Mat kd;
  SimulationConfig simulation;

  MechanicalSystem make_system() const;
  FreeMassFunction make_free_function(const MechanicalSystem& sys) const;
};

/// Parses and validates a config. Unknown keys, wrong types and sizes that
/// do not match the plant throw ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace phshape
