#include "phshape/potential.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "phshape/errors.hpp"
#include "phshape/log.hpp"

namespace phshape {
namespace {

using GridRhs = std::function<Vec(double, const Vec&)>;

// Tabulates y' = f(q, y) on the mass-table grid from the table's initial
// point.
GridSolution integrate_on_grid(const GridRhs& f, const AddedMassTable& table, const Vec& y0, const PeOptions& opts) {
  const auto& grid = table.grid();
  const double q0 = table.init.q_i;
  const auto anchor_it = std::lower_bound(grid.begin(), grid.end(), q0);
  if (anchor_it == grid.end() || *anchor_it != q0) {
    throw Error(fmt::format("initial point {} is not a node of the mass table", q0));
  }
  ode::Rhs rhs = [&](double q, const Vec& y, Vec& dy) { dy = f(q, y); };
  auto sol = tabulate_ode(rhs, grid, static_cast<std::size_t>(anchor_it - grid.begin()), y0, opts.refine_tol);
  return {std::move(sol.table), sol.lo_complete ? std::string("table end") : sol.lo_reason,
          sol.hi_complete ? std::string("table end") : sol.hi_reason};
}

void require_planar(const MechanicalSystem& sys, const char* what) {
  if (sys.n() != 2 || sys.m() != 1) {
    throw DimensionError(fmt::format("{}: needs n = 2, m = 1, system '{}' has n = {}, m = {}", what, sys.name(),
                                     sys.n(), sys.m()));
  }
}

double unactuated_grad_v(const MechanicalSystem& sys, const Vec& q) {
  return (sys.annihilator() * sys.potential_grad(q))(0);
}

// G^perp grad V at (q_i, q_o) for the trig ansatz.
double trig_grad_v(const MechanicalSystem& sys, double q_i, double q_o) {
  Vec q = configuration_at(sys, q_i);
  q(1 - *sys.mass_coord()) = q_o;
  return unactuated_grad_v(sys, q);
}

void check_trig_form(const MechanicalSystem& sys, const AddedMassTable& table) {
  for (double q_i : {table.lo(), table.init.q_i, table.hi()}) {
    const double a = trig_grad_v(sys, q_i, std::numbers::pi / 2.0);
    const double b = trig_grad_v(sys, q_i, 0.0);
    for (double q_o : {0.3, 1.7, -2.2, 3.0}) {
      const double direct = trig_grad_v(sys, q_i, q_o);
      const double model = a * std::sin(q_o) + b * std::cos(q_o);
      if (std::abs(direct - model) > 1e-9 * (1.0 + std::abs(a) + std::abs(b))) {
        throw Error(fmt::format(
            "trig ansatz: potential gradient of '{}' is not of the form A sin q + B cos q (q_i = {}, q = {})",
            sys.name(), q_i, q_o));
      }
    }
  }
}

}  // namespace

const char* to_string(Ansatz a) { return a == Ansatz::Single ? "single" : "trig"; }
const char* to_string(GammaChoice g) { return g == GammaChoice::InvBeta1 ? "inv_beta1" : "inv_beta2"; }

Ansatz parse_ansatz(const std::string& s) {
  if (s == "single") return Ansatz::Single;
  if (s == "trig") return Ansatz::Trig;
  throw ConfigError(fmt::format("unknown potential ansatz '{}' (expected single or trig)", s));
}

GammaChoice parse_gamma_choice(const std::string& s) {
  if (s == "inv_beta1") return GammaChoice::InvBeta1;
  if (s == "inv_beta2") return GammaChoice::InvBeta2;
  throw ConfigError(fmt::format("unknown gamma choice '{}' (expected inv_beta1 or inv_beta2)", s));
}

double GammaTable::value(const Vec& q) const { return q(k) + integral.eval(q(coord)).first(0); }

Vec GammaTable::grad(const Vec& q) const {
  Vec g = Vec::Zero(q.size());
  g(k) = 1.0;
  g(coord) += integral.eval(q(coord)).second(0);
  return g;
}

double ShapedPotential::lo() const { return std::max(vm.lo(), gamma.integral.lo()); }
double ShapedPotential::hi() const { return std::min(vm.hi(), gamma.integral.hi()); }

double ShapedPotential::vm_value(const Vec& q) const {
  const Vec v = vm.eval(q(coord)).first;
  if (ansatz == Ansatz::Single) return v(0);
  return v(0) * std::sin(q(other)) + v(1) * std::cos(q(other));
}

Vec ShapedPotential::vm_grad(const Vec& q) const {
  const auto [v, d] = vm.eval(q(coord));
  Vec g = Vec::Zero(n);
  if (ansatz == Ansatz::Single) {
    g(coord) = d(0);
    return g;
  }
  const double s = std::sin(q(other)), c = std::cos(q(other));
  g(coord) = d(0) * s + d(1) * c;
  g(other) = v(0) * c - v(1) * s;
  return g;
}

double pe_ode_rhs_single(const MechanicalSystem& sys, const AddedMassTable& table, double q_i, double /*v_m*/) {
  if (sys.unactuated() != 1) throw DimensionError("pe_ode_rhs_single: needs underactuation degree one");
  const int coord = *sys.mass_coord();
  const Vec q = configuration_at(sys, q_i);
  const auto st = schur_terms(sys, table.at(q_i).value, q);
  // Only one of G^T grad V_m, G^perp grad V_m is non-zero.
  const double sigma = coord >= sys.m() ? st.s3(0, 0) : st.s2(0, coord);
  if (std::abs(sigma) < 1e-12) {
    throw DomainBoundaryError(fmt::format("potential matching singular at q_i = {:.17g}", q_i), q_i);
  }
  return -st.s1(0, 0) * unactuated_grad_v(sys, q) / sigma;
}

Vec pe_ode_rhs_trig(const MechanicalSystem& sys, const AddedMassTable& table, double q_i, double f1, double f2) {
  require_planar(sys, "pe_ode_rhs_trig");
  if (*sys.mass_coord() != 0) throw DimensionError("pe_ode_rhs_trig: mass coordinate must be the actuated one");
  const auto st = schur_terms(sys, table.at(q_i).value, configuration_at(sys, q_i));
  const double s1 = st.s1(0, 0), s2 = st.s2(0, 0), s3 = st.s3(0, 0);
  if (std::abs(s2) < 1e-12) {
    throw DomainBoundaryError(fmt::format("potential matching singular (s2 = 0) at q_i = {:.17g}", q_i), q_i);
  }
  const double a = trig_grad_v(sys, q_i, std::numbers::pi / 2.0);
  const double b = trig_grad_v(sys, q_i, 0.0);
  Vec d(2);
  d << (s3 * f2 - s1 * a) / s2, (-s1 * b - s3 * f1) / s2;
  return d;
}

Vec pe_residual(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& grad_vm, const Vec& q) {
  const auto st = schur_terms(sys, ma, q);
  const Mat g = sys.input_map();
  const Mat gp = sys.annihilator();
  return st.s1 * (gp * sys.potential_grad(q)) + st.s2 * (g.transpose() * grad_vm) + st.s3 * (gp * grad_vm);
}

Vec pe_residual_d_form(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& grad_vm, const Vec& q) {
  const auto st = schur_terms(sys, ma, q);
  const Mat d = compute_D(sys, ma, q);
  return st.s1 * (sys.annihilator() * sys.potential_grad(q)) + d * sys.inv_mass(q) * grad_vm;
}

Vec gamma_beta(const MechanicalSystem& sys, const AddedMassState& ma) {
  if (sys.m() != 1) throw DimensionError("gamma_beta: needs m = 1");
  const Vec q = configuration_at(sys, ma.q_i);
  return ((ma.full() + sys.inv_mass(q)) * sys.mass(q)).row(0).transpose();
}

GridSolution integrate_pe_single(const MechanicalSystem& sys, const AddedMassTable& table, double v_m0,
                                 const PeOptions& opts) {
  GridRhs f = [&](double q_i, const Vec& y) {
    Vec d(1);
    d(0) = pe_ode_rhs_single(sys, table, q_i, y(0));
    return d;
  };
  return integrate_on_grid(f, table, Vec::Constant(1, v_m0), opts);
}

GridSolution integrate_pe_trig(const MechanicalSystem& sys, const AddedMassTable& table, double f1_0, double f2_0,
                               const PeOptions& opts) {
  require_planar(sys, "integrate_pe_trig");
  check_trig_form(sys, table);
  GridRhs f = [&](double q_i, const Vec& y) { return pe_ode_rhs_trig(sys, table, q_i, y(0), y(1)); };
  Vec y0(2);
  y0 << f1_0, f2_0;
  return integrate_on_grid(f, table, y0, opts);
}

GammaTable build_gamma(const MechanicalSystem& sys, const AddedMassTable& table, GammaChoice choice,
                       const PeOptions& opts) {
  require_planar(sys, "build_gamma");
  GammaTable out;
  out.choice = choice;
  out.k = choice == GammaChoice::InvBeta1 ? 0 : 1;
  out.coord = *sys.mass_coord();
  if (out.k == out.coord) {
    throw ConfigError(fmt::format("gamma choice {} divides by the mass coordinate's own component; the integral "
                                  "would depend on the other coordinate",
                                  to_string(choice)));
  }

  double sign = 0.0;
  for (std::size_t j = 0; j < table.size(); ++j) {
    const auto ma = table.node(j).value;
    const double bk = gamma_beta(sys, ma)(out.k);
    if (std::abs(bk) < 1e-12 || (sign != 0.0 && bk * sign < 0.0)) {
      throw DomainBoundaryError(fmt::format("beta_{} vanishes near q_i = {:.17g}", out.k + 1, ma.q_i), ma.q_i);
    }
    sign = bk > 0.0 ? 1.0 : -1.0;
  }

  GridRhs f = [&](double q_i, const Vec&) {
    const Vec beta = gamma_beta(sys, table.at(q_i).value);
    return Vec::Constant(1, beta(out.coord) / beta(out.k));
  };
  out.integral = integrate_on_grid(f, table, Vec::Zero(1), opts).table;
  return out;
}

ShapedPotential synthesize_potential(const MechanicalSystem& sys, const AddedMassTable& table,
                                     const PotentialSpec& spec) {
  if (!(spec.kappa >= 0.0)) throw ConfigError("potential: kappa must be non-negative");
  ShapedPotential pot;
  pot.ansatz = spec.ansatz;
  pot.n = sys.n();
  pot.coord = *sys.mass_coord();
  pot.init = spec.init;
  pot.kappa = spec.kappa;
  pot.options = spec.options;

  GridSolution sol;
  if (spec.ansatz == Ansatz::Single) {
    if (spec.init.size() != 1) throw ConfigError("potential: single ansatz takes one initial value V_m0");
    if (sys.unactuated() == 1 && pot.coord >= sys.m()) {
      const auto st = schur_terms(sys, table.at(table.init.q_i).value, configuration_at(sys, table.init.q_i));
      const double s1 = st.s1(0, 0), s3 = st.s3(0, 0);
      if (!(s3 > 0.0) || !(s1 / s3 > 0.0)) {
        log::warn("shaping: s1 = {:.6g}, s3 = {:.6g} at q_i = {}; V_m will not reverse the open-loop potential there",
                  s1, s3, table.init.q_i);
      }
    }
    sol = integrate_pe_single(sys, table, spec.init(0), spec.options);
  } else {
    if (spec.init.size() != 2) throw ConfigError("potential: trig ansatz takes two initial values f1_0, f2_0");
    pot.other = 1 - pot.coord;
    sol = integrate_pe_trig(sys, table, spec.init(0), spec.init(1), spec.options);
  }
  pot.vm = std::move(sol.table);
  pot.lo_reason = std::move(sol.lo_reason);
  pot.hi_reason = std::move(sol.hi_reason);
  pot.gamma = build_gamma(sys, table, spec.gamma, spec.options);
  return pot;
}

std::pair<double, Vec> eval_Vd(const ShapedPotential& pot, const Vec& q) {
  const double qi = q(pot.coord);
  if (!pot.contains(qi)) {
    throw OutOfDomainError(
        fmt::format("V_d requested at q_i = {:.17g}, outside [{:.17g}, {:.17g}]", qi, pot.lo(), pot.hi()), qi);
  }
  const double gamma = pot.gamma.value(q);
  return {pot.vm_value(q) + 0.5 * pot.kappa * gamma * gamma, pot.vm_grad(q) + pot.kappa * gamma * pot.gamma.grad(q)};
}

}  // namespace phshape
