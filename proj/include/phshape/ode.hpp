#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "phshape/linalg.hpp"

namespace phshape::ode {

/// dy/dt = f(t, y). May throw phshape::Error to signal that (t, y) lies
/// outside the region where f is defined; the integrator then shrinks the
/// step and approaches the boundary.
using Rhs = std::function<void(double t, const Vec& y, Vec& dydt)>;

/// Called after every accepted step; returning false stops integration.
using StepObserver = std::function<bool(double t, const Vec& y, const Vec& dydt)>;

struct Options {
  double rtol = 1e-9;
  double atol = 1e-12;
  /// 0 selects an initial step automatically.
  double h_init = 0.0;
  double h_min = 1e-12;
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 10'000'000;
};

enum class Status {
  Completed,
  StepUnderflow,
  /// The right-hand side kept failing until the step underflowed.
  RhsFailure,
  MaxSteps,
  StoppedByObserver,
};

const char* to_string(Status s);

/// An accepted point of the discrete solution together with f(t, y).
struct Node {
  double t;
  Vec y;
  Vec dydt;
};

struct Result {
  Status status = Status::Completed;
  std::string message;
  /// Last accepted time.
  double t_reached = 0.0;
  Vec y_reached;
  /// Samples at the requested output times that were reached.
  std::vector<double> t_out;
  std::vector<Vec> y_out;
  /// All accepted nodes (including the initial one) when requested.
  std::vector<Node> nodes;
  long accepted = 0;
  long rejected = 0;

  bool ok() const { return status == Status::Completed; }
};

/// Adaptive Dormand-Prince 5(4) integration from t0 to t1 (either
/// direction) with the pair's 4th-order continuous extension for the
/// requested output times. `t_eval` must be monotone in the direction of
/// integration.
Result integrate(const Rhs& f, double t0, const Vec& y0, double t1, const std::vector<double>& t_eval,
                 const Options& opts = {}, bool keep_nodes = false, const StepObserver& observer = {});

}  // namespace phshape::ode
