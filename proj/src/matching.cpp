#include "phshape/matching.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "phshape/errors.hpp"

namespace phshape {
namespace {

Mat symmetric_from_upper(const Mat& a) {
  Mat s = a.triangularView<Eigen::Upper>();
  s.triangularView<Eigen::StrictlyLower>() = a.transpose().triangularView<Eigen::StrictlyLower>();
  return s;
}

int require_coord(const MechanicalSystem& sys, const char* what) {
  if (!sys.mass_coord()) {
    throw Error(fmt::format("{}: system '{}' has no single mass coordinate", what, sys.name()));
  }
  return *sys.mass_coord();
}

void require_degree_one(const MechanicalSystem& sys, const char* what) {
  if (sys.unactuated() != 1) {
    throw DimensionError(fmt::format("{}: needs underactuation degree one, system '{}' has {}", what, sys.name(),
                                     sys.unactuated()));
  }
}

/// Everything about M^{-1} that the matching terms need at one point.
struct InverseMassData {
  Mat minv;
  std::vector<Mat> dminv;
};

InverseMassData inverse_mass_data(const MechanicalSystem& sys, const Vec& q) {
  Mat minv = sys.inv_mass(q);
  auto dminv = sys.inv_mass_jacobian(q, minv);
  return {std::move(minv), std::move(dminv)};
}

std::vector<Mat> y_slices(const InverseMassData& im, const Mat& ma, const Mat& dma, int coord) {
  const auto n = im.minv.rows();
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    // [d(M_a^{-1} e_i)/dq]^T has the single non-zero row `coord`.
    Mat jat = Mat::Zero(n, n);
    jat.row(coord) = dma.col(i).transpose();
    Mat jm(n, n);
    for (Eigen::Index k = 0; k < n; ++k) jm.col(k) = im.dminv[static_cast<std::size_t>(k)].col(i);
    out.push_back(0.5 * im.minv * jat - 0.5 * jm * ma);
  }
  return out;
}

Mat d_matrix(const Mat& minv, const Mat& ma, int m, double q_i) {
  const Mat s = minv + ma;
  const auto r = s.rows() - m;
  const Mat s11 = s.topLeftCorner(m, m);
  const Mat s21 = s.bottomLeftCorner(r, m);
  Mat d(r, s.rows());
  try {
    d.leftCols(m) = s21 * checked_inverse(s11, "m11 + m_a11");
  } catch (const SingularMatrixError& e) {
    throw DomainBoundaryError(fmt::format("D undefined at q_i = {:.17g}: {}", q_i, e.what()), q_i);
  }
  d.rightCols(r) = -Mat::Identity(r, r);
  return d;
}

std::vector<Mat> residual_blocks(const InverseMassData& im, const Mat& ma, const Mat& dma, int coord, const Mat& d) {
  std::vector<Mat> out;
  for (const Mat& yi : y_slices(im, ma, dma, coord)) out.push_back(d * (yi + yi.transpose()) * d.transpose());
  return out;
}

Vec residual_vector(const InverseMassData& im, const Mat& ma, const Mat& dma, int coord, const Mat& d) {
  const auto blocks = residual_blocks(im, ma, dma, coord, d);
  Vec r(static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i) r(static_cast<Eigen::Index>(i)) = blocks[i](0, 0);
  return r;
}

}  // namespace

Mat AddedMassState::full() const {
  const auto m = m_a11.rows();
  const auto r = m_a22.rows();
  Mat out(m + r, m + r);
  out.topLeftCorner(m, m) = symmetric_from_upper(m_a11);
  out.topRightCorner(m, r) = m_a21.transpose();
  out.bottomLeftCorner(r, m) = m_a21;
  out.bottomRightCorner(r, r) = symmetric_from_upper(m_a22);
  return out;
}

AddedMassState AddedMassState::from_full(double q_i, const Mat& ma, int m) {
  const auto r = ma.rows() - m;
  return {q_i, ma.topLeftCorner(m, m), ma.bottomLeftCorner(r, m), ma.bottomRightCorner(r, r)};
}

FreeMassFunction constant_free_function(const Mat& value) {
  FreeMassFunction f;
  f.kind = "constant";
  f.parameter = value;
  f.eval = [value](double) { return value; };
  f.deriv = [value](double) { return Mat(Mat::Zero(value.rows(), value.cols())); };
  return f;
}

FreeMassFunction target_md_free_function(const MechanicalSystem& sys, const Mat& md_inv) {
  const int coord = require_coord(sys, "target_Md free function");
  if (md_inv.rows() != sys.n() || md_inv.cols() != sys.n()) {
    throw DimensionError("target_Md free function: M_d^{-1} must be n x n");
  }
  const int m = sys.m();
  FreeMassFunction f;
  f.kind = "target_Md";
  f.parameter = md_inv;
  f.eval = [sys, md_inv, m](double q_i) {
    const Mat minv = sys.inv_mass(configuration_at(sys, q_i));
    return Mat((md_inv - minv).topLeftCorner(m, m));
  };
  f.deriv = [sys, m, coord](double q_i) {
    const auto dminv = sys.inv_mass_jacobian(configuration_at(sys, q_i));
    return Mat(-dminv[static_cast<std::size_t>(coord)].topLeftCorner(m, m));
  };
  return f;
}

Vec configuration_at(const MechanicalSystem& sys, double q_i) {
  Vec q = Vec::Zero(sys.n());
  q(require_coord(sys, "configuration_at")) = q_i;
  return q;
}

YTerms compute_Y(const MechanicalSystem& sys, const AddedMassJet& ma, const Vec& q, const Vec& p) {
  const int coord = require_coord(sys, "compute_Y");
  const auto im = inverse_mass_data(sys, q);
  const Mat a = ma.full();
  const Mat da = ma.dfull();
  const auto n = sys.n();

  YTerms out;
  out.slices = y_slices(im, a, da, coord);
  Mat jat = Mat::Zero(n, n);
  jat.row(coord) = (da * p).transpose();
  const Mat jm = inv_mass_times_p_jacobian(im.dminv, p);
  out.y = 0.5 * im.minv * jat - 0.5 * jm * a;
  return out;
}

Mat compute_D(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& q) {
  return d_matrix(sys.inv_mass(q), ma.full(), sys.m(), ma.q_i);
}

std::vector<Mat> ke_residual_blocks(const MechanicalSystem& sys, const AddedMassJet& ma, const Vec& q) {
  const int coord = require_coord(sys, "ke_residual");
  const auto im = inverse_mass_data(sys, q);
  const Mat a = ma.full();
  return residual_blocks(im, a, ma.dfull(), coord, d_matrix(im.minv, a, sys.m(), ma.value.q_i));
}

Vec ke_residual(const MechanicalSystem& sys, const AddedMassJet& ma) {
  require_degree_one(sys, "ke_residual");
  const int coord = require_coord(sys, "ke_residual");
  const auto im = inverse_mass_data(sys, configuration_at(sys, ma.value.q_i));
  const Mat a = ma.full();
  return residual_vector(im, a, ma.dfull(), coord, d_matrix(im.minv, a, sys.m(), ma.value.q_i));
}

Vec pack_unknowns(const AddedMassState& s) {
  const auto r = s.m_a22.rows();
  const auto m = s.m_a21.cols();
  Vec y(r * m + r * (r + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < m; ++j) y(k++) = s.m_a21(i, j);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = i; j < r; ++j) y(k++) = s.m_a22(i, j);
  return y;
}

void unpack_unknowns(const Vec& y, int n, int m, AddedMassState& s) {
  const int r = n - m;
  s.m_a21.resize(r, m);
  s.m_a22.resize(r, r);
  Eigen::Index k = 0;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < m; ++j) s.m_a21(i, j) = y(k++);
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) s.m_a22(i, j) = s.m_a22(j, i) = y(k++);
}

AddedMassJet ke_ode_rhs(const MechanicalSystem& sys, const FreeMassFunction& free, double q_i,
                        const AddedMassState& state) {
  require_degree_one(sys, "ke_ode_rhs");
  const int coord = require_coord(sys, "ke_ode_rhs");
  const int n = sys.n(), m = sys.m();

  AddedMassJet jet;
  jet.value = state;
  jet.value.q_i = q_i;
  jet.value.m_a11 = free.eval(q_i);
  jet.deriv.q_i = q_i;
  jet.deriv.m_a11 = free.deriv(q_i);

  const auto im = inverse_mass_data(sys, configuration_at(sys, q_i));
  const Mat a = jet.value.full();
  const Mat d = d_matrix(im.minv, a, m, q_i);

  // The residuals are affine in the unknown derivatives: probe the map.
  auto residual_for = [&](const Vec& u) {
    AddedMassState ds = jet.deriv;
    unpack_unknowns(u, n, m, ds);
    return residual_vector(im, a, ds.full(), coord, d);
  };
  const Vec b = residual_for(Vec::Zero(n));
  Mat lin(n, n);
  for (int k = 0; k < n; ++k) lin.col(k) = residual_for(Vec::Unit(n, k)) - b;

  const double scale = d.cwiseAbs().maxCoeff() * d.cwiseAbs().maxCoeff() * im.minv.cwiseAbs().maxCoeff();
  const double cond = condition_number(lin);
  if (!(lin.cwiseAbs().maxCoeff() > 1e-12 * scale) || !(cond <= 1e12)) {
    throw DomainBoundaryError(
        fmt::format("kinetic-energy matching system degenerate at q_i = {:.17g} (cond {:.3e})", q_i, cond), q_i);
  }
  const Vec u = lin.partialPivLu().solve(-b);
  unpack_unknowns(u, n, m, jet.deriv);
  return jet;
}

SchurTerms schur_terms(const MechanicalSystem& sys, const AddedMassState& ma, const Vec& q) {
  const int m = sys.m();
  const Mat minv = sys.inv_mass(q);
  const auto mb = partition_matrix(m, minv);
  const auto sb = partition_matrix(m, Mat(minv + ma.full()));
  Mat x;
  try {
    x = sb.b21 * checked_inverse(sb.b11, "m11 + m_a11");
  } catch (const SingularMatrixError& e) {
    throw DomainBoundaryError(fmt::format("Schur terms undefined at q_i = {:.17g}: {}", ma.q_i, e.what()), ma.q_i);
  }
  return {sb.b22 - x * sb.b21.transpose(), x * mb.b11 - mb.b21, x * mb.b21.transpose() - mb.b22};
}

double lambda_min(const MechanicalSystem& sys, const AddedMassState& ma) {
  return min_sym_eig(sys.inv_mass(configuration_at(sys, ma.q_i)) + ma.full());
}

AddedMassTable::AddedMassTable(int n, int m, int coord, FreeMassFunction free, HermiteTable channels)
    : n_(n), m_(m), coord_(coord), free_(std::move(free)), channels_(std::move(channels)) {}

AddedMassJet AddedMassTable::at(double q_i) const {
  const auto [v, d] = channels_.eval(q_i);
  AddedMassJet jet;
  jet.value.q_i = q_i;
  jet.deriv.q_i = q_i;
  unpack_unknowns(v, n_, m_, jet.value);
  unpack_unknowns(d, n_, m_, jet.deriv);
  jet.value.m_a11 = free_.eval(q_i);
  jet.deriv.m_a11 = free_.deriv(q_i);
  return jet;
}

AddedMassJet AddedMassTable::node(std::size_t k) const {
  const auto row = static_cast<Eigen::Index>(k);
  const double q_i = channels_.grid()[k];
  AddedMassJet jet;
  jet.value.q_i = q_i;
  jet.deriv.q_i = q_i;
  unpack_unknowns(channels_.values().row(row).transpose(), n_, m_, jet.value);
  unpack_unknowns(channels_.derivs().row(row).transpose(), n_, m_, jet.deriv);
  jet.value.m_a11 = free_.eval(q_i);
  jet.deriv.m_a11 = free_.deriv(q_i);
  return jet;
}

AddedMassTable integrate_ke(const MechanicalSystem& sys, const FreeMassFunction& free, const AddedMassState& init,
                            std::pair<double, double> range, const KeSynthesisOptions& opts) {
  require_degree_one(sys, "integrate_ke");
  const int coord = require_coord(sys, "integrate_ke");
  const int n = sys.n(), m = sys.m();
  const double q0 = init.q_i;
  if (!(range.first <= q0 && q0 <= range.second)) {
    throw Error(fmt::format("integrate_ke: initial point {} outside range [{}, {}]", q0, range.first, range.second));
  }
  if (!(opts.grid_step > 0.0)) throw Error("integrate_ke: grid step must be positive");

  // Immediate failure at the initial point is an error, not a boundary.
  (void)ke_ode_rhs(sys, free, q0, init);

  ode::Rhs rhs = [&](double q, const Vec& y, Vec& dy) {
    AddedMassState s;
    unpack_unknowns(y, n, m, s);
    dy = pack_unknowns(ke_ode_rhs(sys, free, q, s).deriv);
  };
  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;
  o.h_min = opts.h_min;
  // Dense output inside long steps carries errors that are small in value
  // but not in slope, which the Hermite derivative would pick up.
  o.h_max = opts.grid_step;

  const Vec y0 = pack_unknowns(init);
  std::vector<double> fwd_eval, bwd_eval;
  for (long k = 1;; ++k) {
    const double q = q0 + static_cast<double>(k) * opts.grid_step;
    if (q > range.second) break;
    fwd_eval.push_back(q);
  }
  for (long k = 1;; ++k) {
    const double q = q0 - static_cast<double>(k) * opts.grid_step;
    if (q < range.first) break;
    bwd_eval.push_back(q);
  }
  const auto fwd = ode::integrate(rhs, q0, y0, range.second, fwd_eval, o, true);
  const auto bwd = ode::integrate(rhs, q0, y0, range.first, bwd_eval, o, true);

  // Nodes: accepted steps plus the uniform samples, a sample closer
  // than grid_step / 1000 to an accepted node being dropped. Values are then
  // recomputed by marching across these nodes (see tabulate_ode).
  // Steps at the grid_step cap add nothing over the uniform samples, so only
  // accepted nodes from shortened steps are kept.
  std::vector<double> nodes;
  for (const auto* r : {&bwd, &fwd}) {
    for (std::size_t k = 0; k < r->nodes.size(); ++k) {
      const double prev = k == 0 ? r->nodes[k].t : r->nodes[k - 1].t;
      const double next = k + 1 == r->nodes.size() ? r->nodes[k].t : r->nodes[k + 1].t;
      const double shortest = std::min(std::abs(r->nodes[k].t - prev), std::abs(next - r->nodes[k].t));
      if (k == 0 || k + 1 == r->nodes.size() || shortest < 0.5 * opts.grid_step) nodes.push_back(r->nodes[k].t);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const double merge_tol = 1e-3 * opts.grid_step;
  std::vector<double> grid = nodes;
  for (const auto* r : {&bwd, &fwd}) {
    for (double t : r->t_out) {
      auto it = std::lower_bound(nodes.begin(), nodes.end(), t - merge_tol);
      if (it != nodes.end() && std::abs(*it - t) <= merge_tol) continue;
      grid.push_back(t);
    }
  }
  std::sort(grid.begin(), grid.end());
  const auto anchor = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), q0) - grid.begin());

  auto sol = tabulate_ode(rhs, grid, anchor, y0, opts.refine_tol);
  auto edge_reason = [](const ode::Result& r, bool complete, const std::string& march) {
    if (!r.ok()) return fmt::format("{}: {}", ode::to_string(r.status), r.message);
    return complete ? std::string("range end") : march;
  };

  AddedMassTable table(n, m, coord, free, std::move(sol.table));
  table.init = init;
  table.init.m_a11 = free.eval(q0);
  table.options = opts;
  table.requested_range = range;
  table.hi_edge = fwd.ok() && sol.hi_complete ? EdgeKind::RangeEnd : EdgeKind::Boundary;
  table.lo_edge = bwd.ok() && sol.lo_complete ? EdgeKind::RangeEnd : EdgeKind::Boundary;
  table.hi_reason = edge_reason(fwd, sol.hi_complete, sol.hi_reason);
  table.lo_reason = edge_reason(bwd, sol.lo_complete, sol.lo_reason);
  return table;
}

}  // namespace phshape
