#pragma once

#include <string>
#include <utility>
#include <vector>

#include "phshape/linalg.hpp"
#include "phshape/ode.hpp"

namespace phshape {

/// Piecewise cubic Hermite interpolant of a vector-valued function of one
/// variable, built from value/derivative pairs on a strictly ascending grid.
class HermiteTable {
 public:
  HermiteTable() = default;
  /// values/derivs: one row per node, one column per channel.
  HermiteTable(std::vector<double> grid, Mat values, Mat derivs);

  const std::vector<double>& grid() const { return grid_; }
  const Mat& values() const { return values_; }
  const Mat& derivs() const { return derivs_; }
  Eigen::Index channels() const { return values_.cols(); }
  std::size_t size() const { return grid_.size(); }
  bool empty() const { return grid_.empty(); }
  double lo() const { return grid_.front(); }
  double hi() const { return grid_.back(); }
  bool contains(double x) const { return !grid_.empty() && x >= grid_.front() && x <= grid_.back(); }

  /// Interpolated value and its exact derivative at x. Throws
  /// OutOfDomainError outside [lo, hi].
  std::pair<Vec, Vec> eval(double x) const;

 private:
  std::vector<double> grid_;
  Mat values_;
  Mat derivs_;
};

/// Refines a table of solution samples of y' = f(x, y) until the slope of
/// the interpolant agrees with f to atol + rtol |f| inside every cell. The
/// check runs where the cubic's slope error peaks; failing cells are split
/// at their midpoint, whose value comes from integrating across the half
/// cell. Cells narrower than `min_width` are left alone.
HermiteTable refine_against_ode(const HermiteTable& table, const ode::Rhs& f, double atol, double rtol,
                                double min_width = 1e-8);

struct TabulatedSolution {
  HermiteTable table;
  bool lo_complete = true;
  bool hi_complete = true;
  std::string lo_reason;
  std::string hi_reason;
};

/// Tabulates the solution of y' = f(x, y), y(grid[anchor]) = y0, on `grid`.
/// Integration marches outward one cell at a time with tolerance
/// tol * cell width, so that neighbouring values are consistent to the slope
/// tolerance, and the result is passed through refine_against_ode. A side
/// whose march fails is truncated at its last good node.
TabulatedSolution tabulate_ode(const ode::Rhs& f, const std::vector<double>& grid, std::size_t anchor,
                               const Vec& y0, double tol);

}  // namespace phshape
