#include "phshape/linalg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "phshape/errors.hpp"

namespace phshape {

double max_sym_eig(const Mat& a) {
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  return symmetric_eigen_range(a).second;
}

double min_sym_eig(const Mat& a) {
  if (a.size() == 0) return std::numeric_limits<double>::infinity();
  return symmetric_eigen_range(a).first;
}

double condition_number(const Mat& a) {
  if (a.size() == 0) return 1.0;
  if (a.rows() == 2 && a.cols() == 2) {
    // Singular values of a 2x2 from the invariants of a^T a.
    const double fro2 = a.squaredNorm();
    const double det = std::abs(a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0));
    if (det == 0.0 || !std::isfinite(fro2)) return std::numeric_limits<double>::infinity();
    const double disc = std::sqrt(std::max(0.0, fro2 * fro2 - 4.0 * det * det));
    const double s2max = 0.5 * (fro2 + disc);
    return s2max / det;  // smax / smin = smax^2 / (smax smin)
  }
  Eigen::JacobiSVD<Mat> svd(a);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0 || !std::isfinite(smin)) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

std::pair<double, double> symmetric_eigen_range(const Mat& a) {
  const Mat s = 0.5 * (a + a.transpose());
  if (s.rows() == 1) return {s(0, 0), s(0, 0)};
  if (s.rows() == 2) {
    const double mean = 0.5 * (s(0, 0) + s(1, 1));
    const double r = std::hypot(0.5 * (s(0, 0) - s(1, 1)), s(0, 1));
    return {mean - r, mean + r};
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

Mat checked_inverse(const Mat& a, const char* context, double max_condition) {
  if (a.rows() != a.cols()) {
    throw DimensionError(fmt::format("{}: cannot invert a {}x{} matrix", context, a.rows(), a.cols()));
  }
  if (a.size() == 0) return a;
  if (a.rows() == 1) {
    if (a(0, 0) == 0.0 || !std::isfinite(a(0, 0))) {
      throw SingularMatrixError(fmt::format("{}: singular scalar pivot", context),
                                std::numeric_limits<double>::infinity());
    }
    return Mat::Constant(1, 1, 1.0 / a(0, 0));
  }
  const double cond = condition_number(a);
  if (!(cond <= max_condition)) {
    throw SingularMatrixError(fmt::format("{}: condition number {:.3e} exceeds {:.1e}", context, cond,
                                          max_condition),
                              cond);
  }
  return a.partialPivLu().inverse();
}

Vec checked_solve(const Mat& a, const Vec& b, const char* context, double max_condition) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    throw DimensionError(fmt::format("{}: incompatible system {}x{} / {}", context, a.rows(), a.cols(),
                                     b.size()));
  }
  const double cond = condition_number(a);
  if (!(cond <= max_condition)) {
    throw SingularMatrixError(fmt::format("{}: condition number {:.3e} exceeds {:.1e}", context, cond,
                                          max_condition),
                              cond);
  }
  return a.partialPivLu().solve(b);
}

double skew_defect(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return (a + a.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace phshape
