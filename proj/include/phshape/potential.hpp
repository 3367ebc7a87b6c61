#pragma once

#include <string>
#include <utility>
#include <vector>

#include "phshape/hermite.hpp"
#include "phshape/matching.hpp"

namespace phshape {

enum class Ansatz {
  /// V_m depends only on the mass coordinate.
  Single,
  /// V_m = f1(q_i) sin q_o + f2(q_i) cos q_o, q_o the other coordinate.
  Trig,
};

/// Which component of beta = G^T (M_a^{-1} + M^{-1}) M divides in Gamma.
enum class GammaChoice { InvBeta1, InvBeta2 };

const char* to_string(Ansatz a);
const char* to_string(GammaChoice g);
Ansatz parse_ansatz(const std::string& s);
GammaChoice parse_gamma_choice(const std::string& s);

struct PeOptions {
  /// Per unit length tolerance of the march across the mass-table grid,
  /// also used as the slope tolerance when refining.
  double refine_tol = 1e-10;
};

/// A table produced by integrating along the mass-table grid from its
/// initial point, with the reason each side stopped.
struct GridSolution {
  HermiteTable table;
  std::string lo_reason;
  std::string hi_reason;
};

/// Gamma(q) = q_k + I(q_i) with I' = beta_i / beta_k and I(anchor) = 0.
struct GammaTable {
  GammaChoice choice = GammaChoice::InvBeta1;
  int k = 0;
  int coord = 0;
  HermiteTable integral;

  double value(const Vec& q) const;
  Vec grad(const Vec& q) const;
};

struct ShapedPotential {
  Ansatz ansatz = Ansatz::Single;
  int n = 0;
  int coord = 0;
  int other = 0;  ///< trig ansatz only
  Vec init;       ///< V_m(q0), or (f1(q0), f2(q0))
  HermiteTable vm;
  std::string lo_reason;
  std::string hi_reason;
  GammaTable gamma;
  double kappa = 0.0;
  PeOptions options;

  /// Domain in the mass coordinate shared by the V_m and Gamma tables.
  double lo() const;
  double hi() const;
  bool contains(double q_i) const { return q_i >= lo() && q_i <= hi(); }

  double vm_value(const Vec& q) const;
  Vec vm_grad(const Vec& q) const;
};

/// dV_m/dq_i = -(s1/s3) grad_{q_i} V when q_i is unactuated, -(s1/s2) when
/// it is actuated. Throws DomainBoundaryError when the divisor vanishes.
double pe_ode_rhs_single(const MechanicalSystem& sys, const AddedMassTable& table, double q_i, double v_m);

/// (df1/dq_i, df2/dq_i) for the trig ansatz. Needs G^perp grad V to be of the
/// form A(q_i) sin q_o + B(q_i) cos q_o, with q_i actuated.
Vec pe_ode_rhs_trig(const MechanicalSystem& sys, const AddedMassTable& table, double q_i, double f1, double f2);

/// s1 G^perp grad V + s2 G^T grad V_m + s3 G^perp grad V_m
Vec pe_residual(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& grad_vm, const Vec& q);
/// s1 G^perp grad V + D M^{-1} grad V_m (same quantity, other factorization).
Vec pe_residual_d_form(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& grad_vm, const Vec& q);

/// beta = G^T (M_a^{-1} + M^{-1}) M as a vector (m = 1).
Vec gamma_beta(const MechanicalSystem& sys, const AddedMassState& ma);

GridSolution integrate_pe_single(const MechanicalSystem& sys, const AddedMassTable& table, double v_m0,
                                 const PeOptions& opts = {});
GridSolution integrate_pe_trig(const MechanicalSystem& sys, const AddedMassTable& table, double f1_0, double f2_0,
                               const PeOptions& opts = {});
/// Throws DomainBoundaryError naming q_i when beta_k vanishes or changes sign
/// on the table.
GammaTable build_gamma(const MechanicalSystem& sys, const AddedMassTable& table, GammaChoice choice,
                       const PeOptions& opts = {});

struct PotentialSpec {
  Ansatz ansatz = Ansatz::Single;
  Vec init;  ///< V_m0, or (f1_0, f2_0)
  double kappa = 0.0;
  GammaChoice gamma = GammaChoice::InvBeta1;
  PeOptions options;
};

ShapedPotential synthesize_potential(const MechanicalSystem& sys, const AddedMassTable& table,
                                     const PotentialSpec& spec);

/// V_d = V_m + kappa Gamma^2 / 2 and its gradient. Throws OutOfDomainError
/// outside the table domain.
std::pair<double, Vec> eval_Vd(const ShapedPotential& pot, const Vec& q);

}  // namespace phshape
