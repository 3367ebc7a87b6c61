#include "phshape/controller.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "phshape/errors.hpp"

namespace phshape {
namespace {

Vec ta_gradient(int n, int coord, const AddedMassJet& jet, const Vec& p) {
  Vec g = Vec::Zero(n);
  g(coord) = 0.5 * p.dot(jet.dfull() * p);
  return g;
}

}  // namespace

ShapedController::ShapedController(MechanicalSystem sys, AddedMassTable mass, ShapedPotential potential, Mat kd)
    : sys_(std::move(sys)), mass_(std::move(mass)), potential_(std::move(potential)), kd_(std::move(kd)) {
  const int m = sys_.m();
  if (kd_.rows() != m || kd_.cols() != m) {
    throw DimensionError(fmt::format("damping gain must be {0} x {0}, got {1} x {2}", m, kd_.rows(), kd_.cols()));
  }
  if ((kd_ - kd_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + kd_.cwiseAbs().maxCoeff())) {
    throw ConfigError("damping gain must be symmetric");
  }
  if (min_sym_eig(kd_) < -1e-12) throw ConfigError("damping gain must be positive semidefinite");
  if (!sys_.mass_coord() || *sys_.mass_coord() != mass_.coord() || potential_.coord != mass_.coord()) {
    throw Error("controller: tables and system disagree on the mass coordinate");
  }
}

ShapedController ShapedController::with_kd(const Mat& kd) const { return {sys_, mass_, potential_, kd}; }

double ShapedController::lo() const { return std::max(mass_.lo(), potential_.lo()); }
double ShapedController::hi() const { return std::min(mass_.hi(), potential_.hi()); }

bool ShapedController::contains(const Vec& q) const {
  const double qi = q(mass_.coord());
  return qi >= lo() && qi <= hi();
}

Vec CbIControllerState::stacked() const {
  Vec x(q_a1.size() + q_a2.size() + p_a.size());
  x << q_a1, q_a2, p_a;
  return x;
}

CbIControllerState CbIControllerState::from_stacked(const Vec& x, int n) {
  return {x.segment(0, n), x.segment(n, n), x.segment(2 * n, n)};
}

ControlTerms control_terms(const ShapedController& ctrl, const Vec& q, const Vec& p) {
  const auto& sys = ctrl.sys();
  const int coord = ctrl.mass().coord();
  ControlTerms t;
  t.q = q;
  t.p = p;
  t.added = ctrl.mass().at(q(coord));
  std::tie(t.vd, t.grad_vd) = eval_Vd(ctrl.potential(), q);
  t.m = sys.mass(q);
  t.minv = sys.inv_mass(q);
  t.ma = t.added.full();
  t.md = checked_inverse(t.minv + t.ma, "M^{-1} + M_a^{-1}");
  t.e = compute_E(sys, {q, p});
  t.y = compute_Y(sys, t.added, q, p);
  t.grad_t = kinetic_gradient(sys, q, p);
  t.grad_ta = ta_gradient(sys.n(), coord, t.added, p);
  t.j = assemble_J(sys, t);
  return t;
}

Mat assemble_J(const MechanicalSystem& sys, const ControlTerms& t) {
  const int n = sys.n(), m = sys.m(), r = n - m;
  const Mat dm = compute_D(sys, t.added.value, t.q);
  const Mat d = dm.leftCols(m);
  const Mat& y = t.y.y;
  const Mat y11 = y.topLeftCorner(m, m), y12 = y.topRightCorner(m, r);
  const Mat y21 = y.bottomLeftCorner(r, m), y22 = y.bottomRightCorner(r, r);

  const Mat j21 = -d * y11 + y21;
  Mat x0(n, n);
  x0.topLeftCorner(m, m) = -y11 + y11.transpose();
  x0.topRightCorner(m, r) = -y12 - y21.transpose();
  x0.bottomLeftCorner(r, m) = y12.transpose() + y21;
  x0.bottomRightCorner(r, r) = -y22 + y22.transpose();

  Mat j = Mat::Zero(n, n);
  j.bottomLeftCorner(r, m) = j21;
  j.topRightCorner(m, r) = -j21.transpose();
  j.bottomRightCorner(r, r) = -0.5 * dm * x0 * dm.transpose();
  return j;
}

Mat assemble_J(const ShapedController& ctrl, const Vec& q, const Vec& p) { return control_terms(ctrl, q, p).j; }

Mat assemble_J2(const ControlTerms& t) {
  const Mat skew_e = t.e - t.e.transpose();
  return t.md * (t.j + t.minv * skew_e * t.minv) * t.md + t.md * t.minv * t.e.transpose() - t.e * t.minv * t.md;
}

Mat assemble_J2(const ShapedController& ctrl, const Vec& q, const Vec& p) {
  return assemble_J2(control_terms(ctrl, q, p));
}

Vec control_law(const ShapedController& ctrl, const Vec& q, const Vec& p, const Vec& v) {
  const auto t = control_terms(ctrl, q, p);
  const Mat g = ctrl.sys().input_map();
  const Vec grad_qa2 = t.grad_ta + t.grad_vd;
  const Vec inner = -t.e.transpose() * t.ma * p + grad_qa2 - t.m * t.j * p;
  return v - g.transpose() * (t.md * t.minv * inner - ctrl.sys().potential_grad(q));
}

Vec control_law_dual(const ShapedController& ctrl, const Vec& q, const Vec& p, const Vec& v) {
  const auto t = control_terms(ctrl, q, p);
  const Mat g = ctrl.sys().input_map();
  Mat y = Mat::Zero(q.size(), q.size());
  for (std::size_t i = 0; i < t.y.slices.size(); ++i) y += p(static_cast<Eigen::Index>(i)) * t.y.slices[i];
  const Vec c_ke = t.md * (y - t.j) * p;
  const Vec c_pe = t.md * t.minv * t.grad_vd;
  return v - g.transpose() * (c_ke + c_pe - ctrl.sys().potential_grad(q));
}

Vec passive_output(const ShapedController& ctrl, const Vec& q, const Vec& p) {
  const Mat mdinv = ctrl.sys().inv_mass(q) + ctrl.mass().at(q(ctrl.mass().coord())).full();
  return ctrl.sys().input_map().transpose() * mdinv * p;
}

Vec damping(const ShapedController& ctrl, const Vec& q, const Vec& p) {
  return -ctrl.kd() * passive_output(ctrl, q, p);
}

double shaped_energy(const ShapedController& ctrl, const Vec& q, const Vec& p) {
  const Mat mdinv = ctrl.sys().inv_mass(q) + ctrl.mass().at(q(ctrl.mass().coord())).full();
  return 0.5 * p.dot(mdinv * p) + eval_Vd(ctrl.potential(), q).first;
}

ReducedRate reduced_dynamics(const ShapedController& ctrl, const Vec& q, const Vec& p, const Vec& v) {
  const auto t = control_terms(ctrl, q, p);
  const Mat mdinv = t.minv + t.ma;
  const Vec grad_q_hd = t.grad_t + t.grad_ta + t.grad_vd;
  const Vec grad_p_hd = mdinv * p;
  ReducedRate out;
  out.qdot = t.minv * t.md * grad_p_hd;
  out.pdot = -t.md * t.minv * grad_q_hd + assemble_J2(t) * grad_p_hd + ctrl.sys().input_map() * v;
  out.md_positive_definite = min_sym_eig(mdinv) > 0.0;
  return out;
}

Mat cbi_structure(const ShapedController& ctrl, const Vec& q_a2, const Vec& p_a) {
  const auto t = control_terms(ctrl, q_a2, p_a);
  const int n = ctrl.sys().n(), m = ctrl.sys().m();
  const Mat g = ctrl.sys().input_map();
  const Mat i = Mat::Identity(n, n);
  const Mat dk = t.md * t.minv * t.e.transpose();
  const Mat mjm = t.md * t.j * t.md;
  const Mat minv_md = t.minv * t.md;
  const Mat md_minv = t.md * t.minv;

  Mat k = Mat::Zero(4 * n + m, 4 * n + m);
  // K11
  k.block(n, 2 * n, n, n) = minv_md;
  k.block(2 * n, n, n, n) = -md_minv;
  k.block(2 * n, 2 * n, n, n) = dk - dk.transpose() + mjm;
  // K12, K13
  k.block(0, 3 * n, n, n) = i;
  k.block(n, 3 * n, n, n) = minv_md;
  k.block(2 * n, 3 * n, n, n) = mjm - dk.transpose();
  k.block(2 * n, 4 * n, n, m) = g;
  // K21, K22, K23
  k.block(3 * n, 0, n, n) = -i;
  k.block(3 * n, n, n, n) = -md_minv;
  k.block(3 * n, 2 * n, n, n) = dk + mjm;
  k.block(3 * n, 3 * n, n, n) = mjm;
  k.block(3 * n, 4 * n, n, m) = g;
  // K31, K32
  k.block(4 * n, 2 * n, m, n) = -g.transpose();
  k.block(4 * n, 3 * n, m, n) = -g.transpose();
  return k;
}

double cbi_hamiltonian(const ShapedController& ctrl, const CbIControllerState& cs) {
  const Mat ma = ctrl.mass().at(cs.q_a2(ctrl.mass().coord())).full();
  return 0.5 * cs.p_a.dot(ma * cs.p_a) + eval_Vd(ctrl.potential(), cs.q_a2).first - ctrl.sys().potential(cs.q_a1);
}

Vec cbi_hamiltonian_grad(const ShapedController& ctrl, const CbIControllerState& cs) {
  const int n = ctrl.sys().n();
  const int coord = ctrl.mass().coord();
  const auto jet = ctrl.mass().at(cs.q_a2(coord));
  Vec g(3 * n);
  g << -ctrl.sys().potential_grad(cs.q_a1),
      ta_gradient(n, coord, jet, cs.p_a) + eval_Vd(ctrl.potential(), cs.q_a2).second, jet.full() * cs.p_a;
  return g;
}

CbIControllerOutput cbi_controller_dynamics(const ShapedController& ctrl, const CbIControllerState& cs,
                                            const Vec& u_c1, const Vec& u_c2) {
  const int n = ctrl.sys().n(), m = ctrl.sys().m();
  if (u_c1.size() != n || u_c2.size() != m) throw DimensionError("cbi_controller_dynamics: port size mismatch");
  Vec e(4 * n + m);
  e << cbi_hamiltonian_grad(ctrl, cs), u_c1, u_c2;
  const Vec f = cbi_structure(ctrl, cs.q_a2, cs.p_a) * e;
  return {CbIControllerState::from_stacked(f.head(3 * n), n), -f.segment(3 * n, n), -f.tail(m)};
}

BlockedPHS closed_loop_phs(std::shared_ptr<const ShapedController> ctrl) {
  const int n = ctrl->sys().n(), m = ctrl->sys().m();
  BlockedPHS phs;
  phs.p = 2 * n;
  phs.c = 3 * n;
  phs.m = m;
  phs.structure = [ctrl, n, m](const Vec&, const Vec& x2) {
    const Mat k = cbi_structure(*ctrl, x2.segment(n, n), x2.segment(2 * n, n));
    Mat fp = Mat::Zero(2 * n, 2 * n);
    fp.topRightCorner(n, n) = Mat::Identity(n, n);
    fp.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
    Mat gp = Mat::Zero(2 * n, n);
    gp.bottomRows(n) = Mat::Identity(n, n);

    const int c = 3 * n;
    const auto k11 = k.block(0, 0, c, c), k12 = k.block(0, c, c, n), k13 = k.block(0, c + n, c, m);
    const auto k21 = k.block(c, 0, n, c), k22 = k.block(c, c, n, n), k23 = k.block(c, c + n, n, m);
    const auto k31 = k.block(c + n, 0, m, c), k32 = k.block(c + n, c, m, n), k33 = k.block(c + n, c + n, m, m);

    Mat f(2 * n + c + m, 2 * n + c + m);
    f.block(0, 0, 2 * n, 2 * n) = fp + gp * k22 * gp.transpose();
    f.block(0, 2 * n, 2 * n, c) = gp * k21;
    f.block(0, 2 * n + c, 2 * n, m) = gp * k23;
    f.block(2 * n, 0, c, 2 * n) = k12 * gp.transpose();
    f.block(2 * n, 2 * n, c, c) = k11;
    f.block(2 * n, 2 * n + c, c, m) = k13;
    f.block(2 * n + c, 0, m, 2 * n) = k32 * gp.transpose();
    f.block(2 * n + c, 2 * n, m, c) = k31;
    f.block(2 * n + c, 2 * n + c, m, m) = k33;
    return f;
  };
  phs.hamiltonian = [ctrl, n](const Vec& x1, const Vec& x2) {
    return ctrl->sys().hamiltonian({x1.head(n), x1.tail(n)}) +
           cbi_hamiltonian(*ctrl, CbIControllerState::from_stacked(x2, n));
  };
  phs.hamiltonian_grad = [ctrl, n](const Vec& x1, const Vec& x2) {
    const Vec q = x1.head(n), p = x1.tail(n);
    Vec g(5 * n);
    g << kinetic_gradient(ctrl->sys(), q, p) + ctrl->sys().potential_grad(q), ctrl->sys().inv_mass(q) * p,
        cbi_hamiltonian_grad(*ctrl, CbIControllerState::from_stacked(x2, n));
    return g;
  };
  phs.casimir = [n](const Vec& x1) {
    Vec x2(3 * n);
    x2 << x1.head(n), x1.head(n), x1.tail(n);
    return x2;
  };
  phs.casimir_jacobian = [n](const Vec&) {
    Mat jc = Mat::Zero(3 * n, 2 * n);
    jc.block(0, 0, n, n) = Mat::Identity(n, n);
    jc.block(n, 0, n, n) = Mat::Identity(n, n);
    jc.block(2 * n, n, n, n) = Mat::Identity(n, n);
    return jc;
  };
  return phs;
}

Mat expected_reduced_structure(const ShapedController& ctrl, const Vec& q, const Vec& p) {
  const auto t = control_terms(ctrl, q, p);
  const int n = ctrl.sys().n(), m = ctrl.sys().m();
  const Mat g = ctrl.sys().input_map();
  Mat f = Mat::Zero(2 * n + m, 2 * n + m);
  f.block(0, n, n, n) = t.minv * t.md;
  f.block(n, 0, n, n) = -t.md * t.minv;
  f.block(n, n, n, n) = assemble_J2(t);
  f.block(n, 2 * n, n, m) = g;
  f.block(2 * n, n, m, n) = -g.transpose();
  return f;
}

}  // namespace phshape
