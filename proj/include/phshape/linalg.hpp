#pragma once

#include <utility>

#include <Eigen/Dense>

namespace phshape {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Largest eigenvalue of (A + A^T) / 2.
double max_sym_eig(const Mat& a);

/// Smallest eigenvalue of (A + A^T) / 2.
double min_sym_eig(const Mat& a);

/// 2-norm condition number via SVD; +inf for an exactly singular matrix.
double condition_number(const Mat& a);
/// Smallest and largest eigenvalue of the symmetric part of a; closed form for 1x1 and 2x2.
std::pair<double, double> symmetric_eigen_range(const Mat& a);

/// Inverse of a square matrix. Throws SingularMatrixError when the condition
/// number exceeds `max_condition`; `context` is prefixed to the message.
Mat checked_inverse(const Mat& a, const char* context, double max_condition = 1e12);

/// Solves A x = b with the same conditioning guard as checked_inverse.
Vec checked_solve(const Mat& a, const Vec& b, const char* context,
                  double max_condition = 1e12);

/// max |A + A^T|
double skew_defect(const Mat& a);

}  // namespace phshape
