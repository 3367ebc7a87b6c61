#include "phshape/hermite.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "phshape/errors.hpp"

namespace phshape {

HermiteTable::HermiteTable(std::vector<double> grid, Mat values, Mat derivs)
    : grid_(std::move(grid)), values_(std::move(values)), derivs_(std::move(derivs)) {
  if (static_cast<Eigen::Index>(grid_.size()) != values_.rows() || values_.rows() != derivs_.rows() ||
      values_.cols() != derivs_.cols()) {
    throw DimensionError("HermiteTable: grid, values and derivatives disagree in size");
  }
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) {
      throw Error(fmt::format("HermiteTable: grid not strictly ascending at index {}", i));
    }
  }
}

std::pair<Vec, Vec> HermiteTable::eval(double x) const {
  if (!contains(x)) {
    throw OutOfDomainError(
        fmt::format("table lookup at {:.17g} outside [{:.17g}, {:.17g}]", x, empty() ? 0.0 : lo(), empty() ? 0.0 : hi()),
        x);
  }
  auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  auto k = static_cast<Eigen::Index>(std::distance(grid_.begin(), it)) - 1;
  if (grid_[static_cast<std::size_t>(k)] == x) {
    return {values_.row(k).transpose(), derivs_.row(k).transpose()};
  }
  const double x0 = grid_[static_cast<std::size_t>(k)];
  const double h = grid_[static_cast<std::size_t>(k) + 1] - x0;
  const double s = (x - x0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  const double g00 = (6 * s2 - 6 * s) / h, g10 = 3 * s2 - 4 * s + 1, g01 = (-6 * s2 + 6 * s) / h,
               g11 = 3 * s2 - 2 * s;
  const auto y0 = values_.row(k), y1 = values_.row(k + 1);
  const auto f0 = derivs_.row(k), f1 = derivs_.row(k + 1);
  Vec v = (h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1).transpose();
  Vec d = (g00 * y0 + g10 * f0 + g01 * y1 + g11 * f1).transpose();
  return {std::move(v), std::move(d)};
}

namespace {

// Error estimates of steps this short are dominated by rounding.
constexpr double kTolFloor = 1e-14;

struct Sample {
  double x;
  Vec y;
  Vec d;
};

Vec hermite_slope(const Sample& a, const Sample& b, double s) {
  const double h = b.x - a.x;
  return ((6 * s * s - 6 * s) / h) * a.y + (3 * s * s - 4 * s + 1) * a.d + ((-6 * s * s + 6 * s) / h) * b.y +
         (3 * s * s - 2 * s) * b.d;
}

Vec hermite_value(const Sample& a, const Sample& b, double s) {
  const double h = b.x - a.x;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * a.y + (s3 - 2 * s2 + s) * h * a.d + (-2 * s3 + 3 * s2) * b.y +
         (s3 - s2) * h * b.d;
}

}  // namespace

HermiteTable refine_against_ode(const HermiteTable& table, const ode::Rhs& f, double atol, double rtol,
                                double min_width) {
  if (table.size() < 2) return table;
  // Zero of the derivative of s(1-s)(1-2s): the slope error of a cubic
  // Hermite cell is largest here.
  const double s_peak = 0.5 - std::sqrt(3.0) / 6.0;
  ode::Options sub;
  sub.max_steps = 100000;

  std::vector<Sample> out;
  out.reserve(table.size());
  auto sample = [&](std::size_t k) {
    const auto row = static_cast<Eigen::Index>(k);
    return Sample{table.grid()[k], table.values().row(row).transpose(), table.derivs().row(row).transpose()};
  };

  std::vector<Sample> pending;
  out.push_back(sample(0));
  for (std::size_t k = 1; k < table.size(); ++k) {
    pending.push_back(sample(k));
    while (!pending.empty()) {
      const Sample& a = out.back();
      const Sample& b = pending.back();
      bool ok = true;
      if (b.x - a.x > min_width) {
        try {
          const double xs = a.x + s_peak * (b.x - a.x);
          Vec fs;
          f(xs, hermite_value(a, b, s_peak), fs);
          const Vec err = hermite_slope(a, b, s_peak) - fs;
          // Below this the slope is limited by cancellation in y(b) - y(a).
          const double roundoff =
              16.0 * std::numeric_limits<double>::epsilon() * std::max(a.y.cwiseAbs().maxCoeff(), b.y.cwiseAbs().maxCoeff()) / (b.x - a.x);
          ok = err.cwiseAbs().maxCoeff() <= atol + rtol * fs.cwiseAbs().maxCoeff() + roundoff;
        } catch (const std::exception&) {
          ok = true;
        }
      }
      if (ok) {
        out.push_back(pending.back());
        pending.pop_back();
        continue;
      }
      const double xm = 0.5 * (a.x + b.x);
      sub.h_init = xm - a.x;
      sub.rtol = sub.atol = std::max(std::min(atol, rtol) * (xm - a.x), kTolFloor);
      sub.h_min = 1e-6 * (xm - a.x);
      const auto r = ode::integrate(f, a.x, a.y, xm, {}, sub);
      Vec dm;
      bool mid_ok = r.ok();
      if (mid_ok) {
        try {
          f(xm, r.y_reached, dm);
        } catch (const std::exception&) {
          mid_ok = false;
        }
      }
      if (!mid_ok) {
        out.push_back(pending.back());
        pending.pop_back();
        continue;
      }
      pending.push_back({xm, r.y_reached, dm});
    }
  }

  std::vector<double> grid;
  Mat values(static_cast<Eigen::Index>(out.size()), table.channels());
  Mat derivs(values.rows(), values.cols());
  grid.reserve(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    grid.push_back(out[k].x);
    values.row(static_cast<Eigen::Index>(k)) = out[k].y.transpose();
    derivs.row(static_cast<Eigen::Index>(k)) = out[k].d.transpose();
  }
  return HermiteTable(std::move(grid), std::move(values), std::move(derivs));
}

TabulatedSolution tabulate_ode(const ode::Rhs& f, const std::vector<double>& grid, std::size_t anchor,
                               const Vec& y0, double tol) {
  if (anchor >= grid.size()) throw Error("tabulate_ode: anchor outside grid");
  ode::Options cell;
  cell.max_steps = 100000;

  // Marches from grid[anchor] towards grid[stop] (exclusive of the anchor).
  auto march = [&](int step, std::vector<Sample>& out, std::string& reason) {
    double x = grid[anchor];
    Vec y = y0;
    for (auto k = static_cast<long>(anchor) + step; k >= 0 && k < static_cast<long>(grid.size()); k += step) {
      const double xn = grid[static_cast<std::size_t>(k)];
      const double width = std::abs(xn - x);
      cell.h_init = width;
      cell.rtol = cell.atol = std::max(tol * width, kTolFloor);
      cell.h_min = 1e-6 * width;
      const auto r = ode::integrate(f, x, y, xn, {}, cell);
      Vec d;
      bool ok = r.ok();
      if (ok) {
        try {
          f(xn, r.y_reached, d);
          ok = d.allFinite();
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok) {
        reason = r.ok() ? fmt::format("right-hand side failed at x = {:.17g}", xn)
                        : fmt::format("{} between {:.17g} and {:.17g}: {}", ode::to_string(r.status), x, xn,
                                      r.message);
        return false;
      }
      out.push_back({xn, r.y_reached, d});
      x = xn;
      y = r.y_reached;
    }
    return true;
  };

  TabulatedSolution sol;
  std::vector<Sample> lo_side, hi_side;
  sol.lo_complete = march(-1, lo_side, sol.lo_reason);
  sol.hi_complete = march(+1, hi_side, sol.hi_reason);

  Vec d0;
  f(grid[anchor], y0, d0);
  std::vector<Sample> all(lo_side.rbegin(), lo_side.rend());
  all.push_back({grid[anchor], y0, d0});
  all.insert(all.end(), hi_side.begin(), hi_side.end());

  std::vector<double> xs;
  Mat values(static_cast<Eigen::Index>(all.size()), y0.size());
  Mat derivs(values.rows(), values.cols());
  for (std::size_t k = 0; k < all.size(); ++k) {
    xs.push_back(all[k].x);
    values.row(static_cast<Eigen::Index>(k)) = all[k].y.transpose();
    derivs.row(static_cast<Eigen::Index>(k)) = all[k].d.transpose();
  }
  sol.table = refine_against_ode(HermiteTable(std::move(xs), std::move(values), std::move(derivs)), f, tol, tol);
  return sol;
}

}  // namespace phshape
