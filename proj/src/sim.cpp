#include "phshape/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "phshape/errors.hpp"
#include "phshape/log.hpp"

namespace phshape {

const char* to_string(SimStatus s) {
  switch (s) {
    case SimStatus::Completed:
      return "completed";
    case SimStatus::DomainExit:
      return "domain-exit";
    case SimStatus::IntegratorFailure:
      return "integrator-failure";
  }
  return "unknown";
}

ode::Result integrate_ivp(const ode::Rhs& f, std::pair<double, double> t_span, const Vec& y0,
                          const SimOptions& opts) {
  const auto [t0, t1] = t_span;
  if (!(opts.dt_out > 0.0)) throw ConfigError("integrate_ivp: dt_out must be positive");
  if (!(t1 >= t0)) throw ConfigError("integrate_ivp: t_span must be ascending");
  {
    Vec d(y0.size());
    f(t0, y0, d);
    if (!d.allFinite()) throw DomainBoundaryError("integrate_ivp: right-hand side not finite at the initial state", t0);
  }
  std::vector<double> t_eval;
  const auto count = static_cast<long>(std::floor((t1 - t0) / opts.dt_out + 1e-9));
  t_eval.reserve(static_cast<std::size_t>(count) + 2);
  for (long k = 0; k <= count; ++k) t_eval.push_back(t0 + static_cast<double>(k) * opts.dt_out);
  if (t1 - t_eval.back() > 1e-9 * opts.dt_out) t_eval.push_back(t1);

  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;
  o.h_min = 1e-14 * std::max(1.0, std::abs(t1 - t0));
  return ode::integrate(f, t0, y0, t1, t_eval, o);
}

namespace {

struct Channels {
  Vec u;
  double h_d;
};

Channels closed_loop_channels(const ShapedController& ctrl, const Vec& q, const Vec& p) {
  return {control_law(ctrl, q, p, damping(ctrl, q, p)), shaped_energy(ctrl, q, p)};
}

SimStatus status_of(const ode::Result& r) {
  switch (r.status) {
    case ode::Status::Completed:
      return SimStatus::Completed;
    case ode::Status::RhsFailure:
      return SimStatus::DomainExit;
    default:
      return SimStatus::IntegratorFailure;
  }
}

void check_init(const ShapedController& ctrl, const PhaseState& init) {
  const int n = ctrl.sys().n();
  if (init.q.size() != n || init.p.size() != n) throw DimensionError("simulation: initial state has the wrong size");
  if (!ctrl.contains(init.q)) {
    const double x = init.q(ctrl.mass().coord());
    throw OutOfDomainError(fmt::format("simulation: initial mass coordinate {:.17g} outside [{:.17g}, {:.17g}]", x,
                                       ctrl.lo(), ctrl.hi()),
                           x);
  }
}

Trajectory start(const ShapedController& ctrl, bool interconnected) {
  Trajectory tr;
  tr.n = ctrl.sys().n();
  tr.m = ctrl.sys().m();
  tr.interconnected = interconnected;
  return tr;
}

void finish(Trajectory& tr, const ode::Result& r, double t_final) {
  tr.status = status_of(r);
  if (!tr.ok()) {
    tr.message = fmt::format("{} at t = {:.17g} (requested {:.17g}): {}", to_string(tr.status), r.t_reached, t_final,
                             r.message);
    log::warn("{}", tr.message);
  }
}

Trajectory simulate_plant_like(const ShapedController& ctrl, const PhaseState& init, double t_final,
                               const SimOptions& opts, bool reduced) {
  check_init(ctrl, init);
  const int n = ctrl.sys().n();
  const ode::Rhs rhs = [&](double, const Vec& y, Vec& dy) {
    const Vec q = y.head(n), p = y.tail(n);
    dy.resize(2 * n);
    if (reduced) {
      const auto r = reduced_dynamics(ctrl, q, p, damping(ctrl, q, p));
      dy << r.qdot, r.pdot;
    } else {
      const Vec u = control_law(ctrl, q, p, damping(ctrl, q, p));
      const auto r = open_loop_rhs(ctrl.sys(), {q, p}, u);
      dy << r.qdot, r.pdot;
    }
  };
  Vec y0(2 * n);
  y0 << init.q, init.p;
  const auto r = integrate_ivp(rhs, {0.0, t_final}, y0, opts);

  auto tr = start(ctrl, false);
  for (std::size_t k = 0; k < r.t_out.size(); ++k) {
    const Vec q = r.y_out[k].head(n), p = r.y_out[k].tail(n);
    const auto ch = closed_loop_channels(ctrl, q, p);
    tr.t.push_back(r.t_out[k]);
    tr.q.push_back(q);
    tr.p.push_back(p);
    tr.u.push_back(ch.u);
    tr.h_d.push_back(ch.h_d);
  }
  finish(tr, r, t_final);
  return tr;
}

}  // namespace

Trajectory simulate_closed_loop(const ShapedController& ctrl, const PhaseState& init, double t_final,
                                const SimOptions& opts) {
  return simulate_plant_like(ctrl, init, t_final, opts, false);
}

Trajectory simulate_reduced(const ShapedController& ctrl, const PhaseState& init, double t_final,
                            const SimOptions& opts) {
  return simulate_plant_like(ctrl, init, t_final, opts, true);
}

Trajectory simulate_interconnected(const ShapedController& ctrl, const PhaseState& init,
                                   const CbIControllerState& offset, double t_final, const SimOptions& opts) {
  check_init(ctrl, init);
  const int n = ctrl.sys().n();
  const Mat g = ctrl.sys().input_map();

  // Returns the plant input together with the controller rate. K33 = 0, so
  // y_c2 does not depend on u_c2 and the damping loop is explicit.
  struct Coupled {
    Vec u;
    CbIControllerState rate;
  };
  const auto couple = [&](const Vec& q, const Vec& p, const CbIControllerState& cs) {
    const Vec u_c1 = ctrl.sys().inv_mass(q) * p;
    auto out = cbi_controller_dynamics(ctrl, cs, u_c1, Vec::Zero(ctrl.sys().m()));
    const Vec u_c2 = -ctrl.kd() * out.y_c2;
    out.rate.p_a += g * u_c2;
    out.y_c1 -= g * u_c2;
    return Coupled{-g.transpose() * out.y_c1, std::move(out.rate)};
  };

  const ode::Rhs rhs = [&](double, const Vec& y, Vec& dy) {
    const Vec q = y.head(n), p = y.segment(n, n);
    const auto cs = CbIControllerState::from_stacked(y.tail(3 * n), n);
    const auto c = couple(q, p, cs);
    const auto r = open_loop_rhs(ctrl.sys(), {q, p}, c.u);
    dy.resize(5 * n);
    dy << r.qdot, r.pdot, c.rate.stacked();
  };

  CbIControllerState cs0{init.q, init.q, init.p};
  if (offset.q_a1.size() == n) cs0.q_a1 += offset.q_a1;
  if (offset.q_a2.size() == n) cs0.q_a2 += offset.q_a2;
  if (offset.p_a.size() == n) cs0.p_a += offset.p_a;
  Vec y0(5 * n);
  y0 << init.q, init.p, cs0.stacked();
  const auto r = integrate_ivp(rhs, {0.0, t_final}, y0, opts);

  auto tr = start(ctrl, true);
  for (std::size_t k = 0; k < r.t_out.size(); ++k) {
    const Vec& y = r.y_out[k];
    const Vec q = y.head(n), p = y.segment(n, n);
    const auto cs = CbIControllerState::from_stacked(y.tail(3 * n), n);
    tr.t.push_back(r.t_out[k]);
    tr.q.push_back(q);
    tr.p.push_back(p);
    tr.u.push_back(couple(q, p, cs).u);
    tr.h_d.push_back(shaped_energy(ctrl, q, p));
    tr.drift.push_back(std::max({(cs.q_a1 - q).norm(), (cs.q_a2 - q).norm(), (cs.p_a - p).norm()}));
    tr.q_a1.push_back(cs.q_a1);
    tr.q_a2.push_back(cs.q_a2);
    tr.p_a.push_back(cs.p_a);
  }
  finish(tr, r, t_final);
  return tr;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  std::string header = "t";
  for (int i = 1; i <= traj.n; ++i) header += fmt::format(",q{}", i);
  for (int i = 1; i <= traj.n; ++i) header += fmt::format(",p{}", i);
  for (int i = 1; i <= traj.m; ++i) header += fmt::format(",u{}", i);
  header += ",H_d";
  if (traj.interconnected) {
    for (int i = 1; i <= traj.n; ++i) header += fmt::format(",qa1_{}", i);
    for (int i = 1; i <= traj.n; ++i) header += fmt::format(",qa2_{}", i);
    for (int i = 1; i <= traj.n; ++i) header += fmt::format(",pa_{}", i);
    header += ",drift";
  }
  os << header << '\n';

  std::string row;
  const auto put = [&row](const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) row += fmt::format(",{:.17g}", v(i));
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    row = fmt::format("{:.17g}", traj.t[k]);
    put(traj.q[k]);
    put(traj.p[k]);
    put(traj.u[k]);
    row += fmt::format(",{:.17g}", traj.h_d[k]);
    if (traj.interconnected) {
      put(traj.q_a1[k]);
      put(traj.q_a2[k]);
      put(traj.p_a[k]);
      row += fmt::format(",{:.17g}", traj.drift[k]);
    }
    os << row << '\n';
  }
}

double max_energy_increase(const Trajectory& traj) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < traj.h_d.size(); ++k) worst = std::max(worst, traj.h_d[k] - traj.h_d[k - 1]);
  return worst;
}

}  // namespace phshape
