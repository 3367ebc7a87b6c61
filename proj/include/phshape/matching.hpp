#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "phshape/hermite.hpp"
#include "phshape/mech_core.hpp"
#include "phshape/ode.hpp"

namespace phshape {

/// Partitioned inverse added mass M_a^{-1} at one value of the driving
/// coordinate. The diagonal blocks are read through their upper triangles,
/// so the assembled matrix is symmetric by construction.
struct AddedMassState {
  double q_i = 0.0;
  Mat m_a11;  ///< m x m
  Mat m_a21;  ///< (n-m) x m
  Mat m_a22;  ///< (n-m) x (n-m)

  /// The full n x n matrix [m_a11 m_a21^T; m_a21 m_a22].
  Mat full() const;
  static AddedMassState from_full(double q_i, const Mat& ma, int m);
};

/// An AddedMassState together with its derivative along q_i.
struct AddedMassJet {
  AddedMassState value;
  AddedMassState deriv;  ///< d/dq_i of each block (q_i field unused)

  Mat full() const { return value.full(); }
  Mat dfull() const { return deriv.full(); }
};

/// The freely chosen m_a11(q_i) and its derivative.
struct FreeMassFunction {
  std::string kind;  ///< "constant" or "target_Md"
  Mat parameter;     ///< the constant block, or the target M_d^{-1}
  std::function<Mat(double)> eval;
  std::function<Mat(double)> deriv;
};

FreeMassFunction constant_free_function(const Mat& value);
/// m_a11(q_i) = G^T [M_d^{-1} - M^{-1}(q_i)] G, which keeps M^{-1} + M_a^{-1}
/// equal to the constant target when the rest of the state starts on it.
FreeMassFunction target_md_free_function(const MechanicalSystem& sys, const Mat& md_inv);

/// q with only the mass coordinate set (M depends on nothing else).
Vec configuration_at(const MechanicalSystem& sys, double q_i);

/// Y(q,p) together with the slices Y^i such that Y = sum_i p_i Y^i.
struct YTerms {
  Mat y;
  std::vector<Mat> slices;
};

YTerms compute_Y(const MechanicalSystem& sys, const AddedMassJet& ma, const Vec& q, const Vec& p);

/// D = [(m21 + m_a21)(m11 + m_a11)^{-1}, -I].
Mat compute_D(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& q);

/// D (Y^i + Y^i^T) D^T for i = 1..n, as (n-m) x (n-m) blocks.
std::vector<Mat> ke_residual_blocks(const MechanicalSystem& sys, const AddedMassJet& ma, const Vec& q);

/// Degree-one form of ke_residual_blocks: n scalars evaluated at q_i.
Vec ke_residual(const MechanicalSystem& sys, const AddedMassJet& ma);

/// Solves the kinetic-energy matching conditions for d(m_a21)/dq_i and
/// d(m_a22)/dq_i. Returns the full jet (m_a11 and its derivative from the
/// free function). Throws DomainBoundaryError when the linear system is
/// degenerate.
AddedMassJet ke_ode_rhs(const MechanicalSystem& sys, const FreeMassFunction& free, double q_i,
                        const AddedMassState& state);

struct SchurTerms {
  Mat s1;  ///< (n-m) x (n-m)
  Mat s2;  ///< (n-m) x m
  Mat s3;  ///< (n-m) x (n-m)
};

SchurTerms schur_terms(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& q);

struct KeSynthesisOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double grid_step = 1e-3;
  double h_min = 1e-12;
  /// Slope tolerance (absolute and relative) for refining the interpolant.
  double refine_tol = 1e-10;
};

/// Why integration stopped on one side of the initial point.
enum class EdgeKind { RangeEnd, Boundary };

/// Solution of the kinetic-energy matching ODE on a grid of the driving
/// coordinate. Nodes are the uniform output grid plus every accepted
/// integrator step, so the interpolant stays accurate where the solution
/// steepens near a domain boundary.
class AddedMassTable {
 public:
  AddedMassTable() = default;
  AddedMassTable(int n, int m, int coord, FreeMassFunction free, HermiteTable channels);

  int n() const { return n_; }
  int m() const { return m_; }
  int coord() const { return coord_; }
  const FreeMassFunction& free_function() const { return free_; }
  const HermiteTable& channels() const { return channels_; }
  const std::vector<double>& grid() const { return channels_.grid(); }
  std::size_t size() const { return channels_.size(); }
  double lo() const { return channels_.lo(); }
  double hi() const { return channels_.hi(); }
  bool contains(double q_i) const { return channels_.contains(q_i); }

  /// Interpolated jet; throws OutOfDomainError outside [lo, hi].
  AddedMassJet at(double q_i) const;
  /// Stored jet at node k (no interpolation).
  AddedMassJet node(std::size_t k) const;

  // Synthesis metadata.
  AddedMassState init;
  KeSynthesisOptions options;
  std::pair<double, double> requested_range{0.0, 0.0};
  EdgeKind lo_edge = EdgeKind::RangeEnd;
  EdgeKind hi_edge = EdgeKind::RangeEnd;
  std::string lo_reason;
  std::string hi_reason;

 private:
  int n_ = 0;
  int m_ = 0;
  int coord_ = 0;
  FreeMassFunction free_;
  HermiteTable channels_;  // columns: m_a21 (row-major), m_a22 (upper triangle)
};

/// Pack/unpack the ODE unknowns (m_a21 entries then the upper triangle of m_a22).
Vec pack_unknowns(const AddedMassState& s);
void unpack_unknowns(const Vec& y, int n, int m, AddedMassState& s);

/// Integrates the matching ODE from `init` towards both ends of `range`,
/// stopping early at a domain boundary (degenerate linear system or step
/// underflow). Throws DomainBoundaryError if no step can be taken from init.
AddedMassTable integrate_ke(const MechanicalSystem& sys, const FreeMassFunction& free, const AddedMassState& init,
                            std::pair<double, double> range, const KeSynthesisOptions& opts = {});

/// min eig of M^{-1}(q) + M_a^{-1}(q_i).
double lambda_min(const MechanicalSystem& sys, const AddedMassState& ma);

}  // namespace phshape
