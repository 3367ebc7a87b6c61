#include "phshape/casimir.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <vector>

#include "phshape/errors.hpp"

namespace phshape {

Mat schur_complement(const Mat& a, Eigen::Index split) {
  if (a.rows() != a.cols() || split < 0 || split > a.rows()) {
    throw DimensionError(fmt::format("schur_complement: bad split {} for {}x{}", split, a.rows(), a.cols()));
  }
  const auto r = a.rows() - split;
  const Mat a11 = a.topLeftCorner(split, split);
  if (r == 0) return a11;
  const Mat a22 = a.bottomRightCorner(r, r);
  const double cond = condition_number(a22);
  if (!(cond <= 1e12)) {
    throw SingularMatrixError(fmt::format("schur_complement: trailing block condition {:.3e}", cond), cond);
  }
  const Mat sol = a22.partialPivLu().solve(a.bottomLeftCorner(r, split));
  return a11 - a.topRightCorner(split, r) * sol;
}

BlockGrid BlockedPHS::blocks(const Vec& x1, const Vec& x2) const {
  const Mat f = structure(x1, x2);
  const std::array<Eigen::Index, 3> off{0, p, p + c};
  const std::array<Eigen::Index, 3> len{p, c, m};
  if (f.rows() != p + c + m || f.cols() != p + c + m) {
    throw DimensionError(fmt::format("BlockedPHS: structure is {}x{}, expected {}", f.rows(), f.cols(), p + c + m));
  }
  BlockGrid g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g[i][j] = f.block(off[i], off[j], len[i], len[j]);
  return g;
}

Vec phs_vector_field(const BlockedPHS& sys, const Vec& x1, const Vec& x2, const Vec& u) {
  Vec rhs(sys.p + sys.c + sys.m);
  rhs << sys.hamiltonian_grad(x1, x2), u;
  Vec out = sys.structure(x1, x2) * rhs;
  out.tail(sys.m) *= -1.0;
  return out;
}

BlockGrid transform_casimir(const BlockedPHS& sys, const Vec& x1) {
  const Vec x2 = sys.casimir(x1);
  const BlockGrid f = sys.blocks(x1, x2);
  const Mat jf = sys.casimir_jacobian(x1);
  const Mat jft = jf.transpose();

  BlockGrid fb;
  fb[0][0] = f[0][0];
  fb[0][1] = f[0][2];
  fb[0][2] = f[0][1] - f[0][0] * jft;
  fb[1][0] = f[2][0];
  fb[1][1] = f[2][2];
  fb[1][2] = f[2][1] - f[2][0] * jft;
  fb[2][0] = f[1][0] - jf * f[0][0];
  fb[2][1] = f[1][2] - jf * f[0][2];
  fb[2][2] = f[1][1] - f[1][0] * jft - jf * f[0][1] + jf * f[0][0] * jft;
  return fb;
}

Mat select_B(const Mat& fbar_col3, double tol) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < fbar_col3.cols(); ++j) {
    if (fbar_col3.rows() > 0 && fbar_col3.col(j).cwiseAbs().maxCoeff() > tol) keep.push_back(j);
  }
  Mat b = Mat::Zero(fbar_col3.cols(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) b(keep[k], static_cast<Eigen::Index>(k)) = 1.0;
  return b;
}

Mat ReducedPHS::structure(const Vec& x1) const {
  const BlockGrid fb = transform_casimir(*full_, x1);
  const auto p = full_->p, m = full_->m;

  Mat col3(fb[0][2].rows() + fb[1][2].rows() + fb[2][2].rows(), fb[0][2].cols());
  col3 << fb[0][2], fb[1][2], fb[2][2];
  const Mat b = select_B(col3);
  const auto k = b.cols();

  Mat fbb(p + m + k, p + m + k);
  fbb << fb[0][0], fb[0][1], fb[0][2] * b,
         fb[1][0], fb[1][1], fb[1][2] * b,
         b.transpose() * fb[2][0], b.transpose() * fb[2][1], b.transpose() * fb[2][2] * b;
  try {
    return schur_complement(fbb, p + m);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(fmt::format("Casimir reduction: B^T F33 B singular at x1 = [{}] ({})",
                                          fmt::join(x1.data(), x1.data() + x1.size(), ", "), e.what()),
                              e.condition());
  }
}

double ReducedPHS::hamiltonian(const Vec& x1) const { return full_->hamiltonian(x1, full_->casimir(x1)); }

Vec ReducedPHS::hamiltonian_grad(const Vec& x1) const {
  const Vec g = full_->hamiltonian_grad(x1, full_->casimir(x1));
  return g.head(full_->p) + full_->casimir_jacobian(x1).transpose() * g.tail(full_->c);
}

Vec ReducedPHS::vector_field(const Vec& x1, const Vec& u) const {
  Vec rhs(full_->p + full_->m);
  rhs << hamiltonian_grad(x1), u;
  Vec out = structure(x1) * rhs;
  out.tail(full_->m) *= -1.0;
  return out;
}

ReducedPHS reduce(BlockedPHS sys) {
  return ReducedPHS(std::make_shared<const BlockedPHS>(std::move(sys)));
}

}  // namespace phshape
