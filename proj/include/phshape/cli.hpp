#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "phshape/config.hpp"
#include "phshape/package.hpp"

namespace phshape::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kPackageError = 2,
  kDomainExit = 3,
  /// A check or simulation verdict failed.
  kCheckFailed = 4,
  kInternalError = 5,
};

enum class SimMode { Reduced, Interconnected };
SimMode parse_mode(const std::string& s);

/// Runs the matching and potential synthesis of a config.
ControllerPackage synthesize(const RunConfig& cfg);

/// One line of the check report.
struct CheckItem {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
};

struct CheckOptions {
  double ke_tol = 1e-7;
  double ke_interp_tol = 1e-5;
  double pe_tol = 1e-7;
  double skew_tol = 1e-10;
  double dual_tol = 1e-9;
  double field_tol = 1e-8;
  int interp_points = 1000;
  int random_states = 200;
  unsigned seed = 20240601;
};

/// Residuals, lambda_min, skewness and dual-path agreement of a controller.
std::vector<CheckItem> check_controller(const ShapedController& ctrl, const CheckOptions& opts = {});

/// Random states with q_i in the central 90% of the domain, the other
/// coordinates in [-0.4, 0.4] and p in [-1, 1]. Deterministic for a seed.
std::vector<PhaseState> random_states(const ShapedController& ctrl, int count, unsigned seed);

/// Plot data. Each writes one CSV with 17 significant digits.
void export_added_mass(std::ostream& os, const ShapedController& ctrl);
void export_potential(std::ostream& os, const ShapedController& ctrl);
/// V_d on a (points x points) grid over [-half, half]^2 clipped to the
/// domain, with log10(V_d - V_d(0) + 1e-12).
void export_vd_grid(std::ostream& os, const ShapedController& ctrl, double half = 0.3, int points = 61);

/// Reads a CSV written by write_trajectory_csv.
Trajectory read_trajectory_csv(const std::filesystem::path& file);

struct Command {
  std::string name;
  std::filesystem::path config;
  SimMode mode = SimMode::Reduced;
  std::filesystem::path out;
};

/// Runs one subcommand, printing its report to `os`. Returns the exit code;
/// errors are reported on `err`.
int run(const Command& cmd, std::ostream& os, std::ostream& err);

}  // namespace phshape::cli
