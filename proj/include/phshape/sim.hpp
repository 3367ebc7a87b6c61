#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "phshape/controller.hpp"
#include "phshape/ode.hpp"

namespace phshape {

enum class SimStatus { Completed, DomainExit, IntegratorFailure };

const char* to_string(SimStatus s);

/// Sampled closed-loop solution. Controller channels are filled only by
/// simulate_interconnected.
struct Trajectory {
  int n = 0;
  int m = 0;
  bool interconnected = false;
  std::vector<double> t;
  std::vector<Vec> q;
  std::vector<Vec> p;
  std::vector<Vec> u;
  std::vector<double> h_d;
  std::vector<Vec> q_a1;
  std::vector<Vec> q_a2;
  std::vector<Vec> p_a;
  std::vector<double> drift;
  SimStatus status = SimStatus::Completed;
  std::string message;

  std::size_t size() const { return t.size(); }
  bool ok() const { return status == SimStatus::Completed; }
};

struct SimOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double dt_out = 1e-3;
};

/// Integrates y' = f(t, y) over t_span with samples every dt_out (the end
/// point included).
ode::Result integrate_ivp(const ode::Rhs& f, std::pair<double, double> t_span, const Vec& y0,
                          const SimOptions& opts = {});

/// Plant driven by control_law with damping injection.
Trajectory simulate_closed_loop(const ShapedController& ctrl, const PhaseState& init, double t_final,
                                const SimOptions& opts = {});

/// The reduced closed loop of reduced_dynamics, with damping injection.
Trajectory simulate_reduced(const ShapedController& ctrl, const PhaseState& init, double t_final,
                            const SimOptions& opts = {});

/// Plant and controller integrated as separate states, coupled through the
/// power ports. The controller starts at (q, q, p) + offset.
Trajectory simulate_interconnected(const ShapedController& ctrl, const PhaseState& init,
                                   const CbIControllerState& offset, double t_final, const SimOptions& opts = {});

/// Header t,q1..,p1..,u1..,H_d[,qa1_1..,qa2_1..,pa_1..,drift]; 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Largest increase of H_d between consecutive samples (<= 0 when monotone).
double max_energy_increase(const Trajectory& traj);

}  // namespace phshape
