#pragma once

#include <memory>

#include "phshape/casimir.hpp"
#include "phshape/matching.hpp"
#include "phshape/potential.hpp"

namespace phshape {

/// Everything needed to evaluate the shaped control law u(q, p).
class ShapedController {
 public:
  /// kd must be m x m, symmetric and positive semidefinite.
  ShapedController(MechanicalSystem sys, AddedMassTable mass, ShapedPotential potential, Mat kd);

  const MechanicalSystem& sys() const { return sys_; }
  const AddedMassTable& mass() const { return mass_; }
  const ShapedPotential& potential() const { return potential_; }
  const Mat& kd() const { return kd_; }
  /// Same controller with another damping gain.
  ShapedController with_kd(const Mat& kd) const;

  /// Domain in the mass coordinate shared by every table.
  double lo() const;
  double hi() const;
  bool contains(const Vec& q) const;

 private:
  MechanicalSystem sys_;
  AddedMassTable mass_;
  ShapedPotential potential_;
  Mat kd_;
};

/// Controller state of the interconnection realization.
struct CbIControllerState {
  Vec q_a1;
  Vec q_a2;
  Vec p_a;

  Vec stacked() const;
  static CbIControllerState from_stacked(const Vec& x, int n);
};

/// Intermediate quantities at one (q, p). Built once and shared by the
/// evaluators below.
struct ControlTerms {
  Vec q;
  Vec p;
  Mat m;
  Mat minv;
  AddedMassJet added;
  Mat ma;
  Mat md;
  Mat e;
  YTerms y;
  Mat j;
  Vec grad_t;
  Vec grad_ta;
  double vd = 0.0;
  Vec grad_vd;
};

/// Throws OutOfDomainError outside the tables, SingularMatrixError when
/// M^{-1} + M_a^{-1} is singular.
ControlTerms control_terms(const ShapedController& ctrl, const Vec& q, const Vec& p);

/// Skew J with J11 = 0 solving D(J - Y) = 0.
Mat assemble_J(const ShapedController& ctrl, const Vec& q, const Vec& p);
Mat assemble_J(const MechanicalSystem& sys, const ControlTerms& t);
/// J2 = M_d {J + M^{-1}(E - E^T)M^{-1}} M_d + M_d M^{-1} E^T - E M^{-1} M_d
Mat assemble_J2(const ShapedController& ctrl, const Vec& q, const Vec& p);
Mat assemble_J2(const ControlTerms& t);

/// Closed form u = v - G^T {M_d M^{-1}[-E^T M_a^{-1} p + grad T_a + grad V_d - M J p] - grad V}.
Vec control_law(const ShapedController& ctrl, const Vec& q, const Vec& p, const Vec& v);
/// Same input through C = M_d (Y - J) p + M_d M^{-1} grad V_d, with Y rebuilt
/// from its momentum slices.
Vec control_law_dual(const ShapedController& ctrl, const Vec& q, const Vec& p, const Vec& v);

/// y = G^T M_d^{-1} p
Vec passive_output(const ShapedController& ctrl, const Vec& q, const Vec& p);
/// v = -K_d y
Vec damping(const ShapedController& ctrl, const Vec& q, const Vec& p);
/// H_d = p^T M_d^{-1} p / 2 + V_d
double shaped_energy(const ShapedController& ctrl, const Vec& q, const Vec& p);

struct ReducedRate : PhaseRate {
  bool md_positive_definite = true;
};

/// [q'; p'] = [0 M^{-1}M_d; -M_d M^{-1} J2] grad H_d + [0; G] v
ReducedRate reduced_dynamics(const ShapedController& ctrl, const Vec& q, const Vec& p, const Vec& v);

/// Structure matrix K of the controller, (3n + n + m) square, ordered
/// (x_c, u_c1, u_c2) with x_c = (q_a1, q_a2, p_a).
Mat cbi_structure(const ShapedController& ctrl, const Vec& q_a2, const Vec& p_a);
double cbi_hamiltonian(const ShapedController& ctrl, const CbIControllerState& cs);
/// Stacked gradient of H_a over (q_a1, q_a2, p_a).
Vec cbi_hamiltonian_grad(const ShapedController& ctrl, const CbIControllerState& cs);

struct CbIControllerOutput {
  CbIControllerState rate;
  Vec y_c1;
  Vec y_c2;
};

/// [x_c'; -y_c1; -y_c2] = K [grad H_a; u_c1; u_c2]
CbIControllerOutput cbi_controller_dynamics(const ShapedController& ctrl, const CbIControllerState& cs,
                                            const Vec& u_c1, const Vec& u_c2);

/// Plant (with virtual input G_p = [0; I]) interconnected with the
/// controller, as a BlockedPHS with Casimir (q_a1, q_a2, p_a) = (q, q, p).
BlockedPHS closed_loop_phs(std::shared_ptr<const ShapedController> ctrl);

/// [[0, M^{-1}M_d, 0], [-M_d M^{-1}, J2, G], [0, -G^T, 0]]
Mat expected_reduced_structure(const ShapedController& ctrl, const Vec& q, const Vec& p);

}  // namespace phshape
