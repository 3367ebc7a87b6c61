#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phshape/linalg.hpp"

namespace phshape {

/// Configuration/momentum pair of a mechanical system.
struct PhaseState {
  Vec q;
  Vec p;
};

/// Time derivative of a PhaseState.
struct PhaseRate {
  Vec qdot;
  Vec pdot;
};

/// Underactuated mechanical system H = 1/2 p^T M^{-1}(q) p + V(q) with the
/// input map fixed to G = [I_m; 0]: the first m coordinates are actuated.
///
/// Values are immutable after construction; all evaluators are pure and may
/// be called concurrently.
class MechanicalSystem {
 public:
  using MatrixFn = std::function<Mat(const Vec&)>;
  using ScalarFn = std::function<double(const Vec&)>;
  using VectorFn = std::function<Vec(const Vec&)>;
  /// Returns n matrices; element k is dM/dq_k.
  using MassJacobianFn = std::function<std::vector<Mat>(const Vec&)>;

  struct Definition {
    std::string name;
    int n = 0;
    int m = 0;
    MatrixFn mass;
    ScalarFn potential;
    VectorFn potential_grad;
    /// Optional analytic dM/dq_k; finite differences are used otherwise.
    MassJacobianFn mass_jacobian;
    /// Index of the only coordinate M depends on, when there is one.
    std::optional<int> mass_coord;
    std::map<std::string, double> params;
  };

  explicit MechanicalSystem(Definition def);

  const std::string& name() const { return def_.name; }
  int n() const { return def_.n; }
  int m() const { return def_.m; }
  int unactuated() const { return def_.n - def_.m; }
  std::optional<int> mass_coord() const { return def_.mass_coord; }
  const std::map<std::string, double>& params() const { return def_.params; }
  bool has_analytic_jacobian() const { return static_cast<bool>(def_.mass_jacobian); }

  Mat mass(const Vec& q) const;
  /// M^{-1}(q); throws SingularMatrixError naming q when cond(M) > 1e12.
  Mat inv_mass(const Vec& q) const;
  /// Element k is d(M^{-1})/dq_k. Analytic when a mass Jacobian is
  /// registered (-M^{-1} dM M^{-1}), central differences otherwise.
  std::vector<Mat> inv_mass_jacobian(const Vec& q) const;
  /// Same, reusing an already computed M^{-1}(q).
  std::vector<Mat> inv_mass_jacobian(const Vec& q, const Mat& minv) const;
  /// Central-difference version of inv_mass_jacobian, step 1e-6 (1 + |q_k|).
  std::vector<Mat> inv_mass_jacobian_fd(const Vec& q) const;

  double potential(const Vec& q) const { return def_.potential(q); }
  Vec potential_grad(const Vec& q) const { return def_.potential_grad(q); }

  double kinetic(const Vec& q, const Vec& p) const;
  double hamiltonian(const PhaseState& s) const;

  /// G = [I_m; 0]
  Mat input_map() const;
  /// G^perp = [0, I_{n-m}]
  Mat annihilator() const;

 private:
  Definition def_;
};

/// Blocks of G^T A G, G^perp A G, G^perp A G^perp^T (and G^T A G^perp^T).
struct BlockPartition {
  Mat b11;
  Mat b21;
  Mat b22;
  std::optional<Mat> b12;

  /// Reassembles [b11 b12; b21 b22], using b21^T when b12 was not requested.
  Mat reassemble() const;
};

BlockPartition partition_matrix(int m, const Mat& a, bool with_b12 = false);
BlockPartition partition_matrix(const MechanicalSystem& sys, const Mat& a, bool with_b12 = false);

/// Jacobian of M^{-1}(q) p with respect to q; column k is d(M^{-1})/dq_k p.
Mat inv_mass_times_p_jacobian(const std::vector<Mat>& dminv, const Vec& p);

/// grad_q T(q, p) = 1/2 [d(M^{-1}p)/dq]^T p
Vec kinetic_gradient(const MechanicalSystem& sys, const Vec& q, const Vec& p);

/// E(q,p) = 1/2 [d(M^{-1}p)/dq]^T M(q), so that E M^{-1} p = grad_q T.
Mat compute_E(const MechanicalSystem& sys, const PhaseState& s);

/// qdot = M^{-1} p, pdot = -grad_q T - grad_q V + G u.
PhaseRate open_loop_rhs(const MechanicalSystem& sys, const PhaseState& s, const Vec& u);

}  // namespace phshape
