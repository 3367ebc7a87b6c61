#pragma once

#include <array>
#include <functional>
#include <memory>

#include "phshape/linalg.hpp"

namespace phshape {

/// A 3x3 grid of matrix blocks.
using BlockGrid = std::array<std::array<Mat, 3>, 3>;

/// A11 - A12 A22^{-1} A21 for the split A = [A11 A12; A21 A22] with A11 of
/// size split x split. Throws SingularMatrixError (carrying the condition
/// estimate) when cond(A22) > 1e12. An empty trailing block returns A11.
Mat schur_complement(const Mat& a, Eigen::Index split);

/// Input-state-output port-Hamiltonian system whose state is split as
/// (x1, x2) with a Casimir x2 = f_c(x1):
///
///   [x1'; x2'; -y] = F(x1, x2) [grad_x1 H; grad_x2 H; u]
///
/// F is (p + c + m) square, ordered (x1, x2, port).
struct BlockedPHS {
  int p = 0;
  int c = 0;
  int m = 0;
  std::function<Mat(const Vec& x1, const Vec& x2)> structure;
  std::function<double(const Vec& x1, const Vec& x2)> hamiltonian;
  /// Returns the stacked gradient [grad_x1 H; grad_x2 H].
  std::function<Vec(const Vec& x1, const Vec& x2)> hamiltonian_grad;
  std::function<Vec(const Vec& x1)> casimir;
  /// c x p Jacobian of f_c.
  std::function<Mat(const Vec& x1)> casimir_jacobian;

  /// F evaluated at (x1, x2) split into its 3x3 block grid.
  BlockGrid blocks(const Vec& x1, const Vec& x2) const;
};

/// Full-order flow: returns [x1'; x2'; y].
Vec phs_vector_field(const BlockedPHS& sys, const Vec& x1, const Vec& x2, const Vec& u);

/// Block grid of F-bar in the coordinates (x1, w = x2 - f_c(x1)), rows and
/// columns ordered (x1, port, w), evaluated on the Casimir manifold.
BlockGrid transform_casimir(const BlockedPHS& sys, const Vec& x1);

/// Column selector for the non-zero columns (max |entry| > tol) of the
/// stacked matrix [F13; F23; F33]. Has zero columns when all columns vanish.
Mat select_B(const Mat& fbar_col3, double tol = 1e-12);

/// Reduced model [x1'; -y] = F_r(x1) [grad H_r; u] with H_r(x1) = H(x1, f_c(x1)).
class ReducedPHS {
 public:
  explicit ReducedPHS(std::shared_ptr<const BlockedPHS> full) : full_(std::move(full)) {}

  int p() const { return full_->p; }
  int m() const { return full_->m; }

  /// F_r(x1); throws SingularMatrixError naming x1 when B^T F33 B is singular.
  Mat structure(const Vec& x1) const;
  double hamiltonian(const Vec& x1) const;
  Vec hamiltonian_grad(const Vec& x1) const;
  /// Returns [x1'; y].
  Vec vector_field(const Vec& x1, const Vec& u) const;

 private:
  std::shared_ptr<const BlockedPHS> full_;
};

ReducedPHS reduce(BlockedPHS sys);

}  // namespace phshape
