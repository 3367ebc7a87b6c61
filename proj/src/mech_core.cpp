#include "phshape/mech_core.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cmath>
#include <limits>

#include "phshape/errors.hpp"

namespace phshape {

MechanicalSystem::MechanicalSystem(Definition def) : def_(std::move(def)) {
  if (def_.n <= 0 || def_.m <= 0 || def_.m >= def_.n) {
    throw DimensionError(fmt::format("system '{}': need 0 < m < n, got n={} m={}", def_.name, def_.n, def_.m));
  }
  if (!def_.mass || !def_.potential || !def_.potential_grad) {
    throw Error(fmt::format("system '{}': mass, potential and potential_grad are required", def_.name));
  }
  if (def_.mass_coord && (*def_.mass_coord < 0 || *def_.mass_coord >= def_.n)) {
    throw DimensionError(fmt::format("system '{}': mass coordinate {} out of range", def_.name, *def_.mass_coord));
  }
}

Mat MechanicalSystem::mass(const Vec& q) const {
  if (q.size() != def_.n) {
    throw DimensionError(fmt::format("system '{}': q has length {}, expected {}", def_.name, q.size(), def_.n));
  }
  return def_.mass(q);
}

Mat MechanicalSystem::inv_mass(const Vec& q) const {
  const Mat mq = mass(q);
  const auto [lo, hi] = symmetric_eigen_range(mq);
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw SingularMatrixError(
        fmt::format("system '{}': mass matrix singular or indefinite at q = [{}]", def_.name,
                    fmt::join(q.data(), q.data() + q.size(), ", ")),
        lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  }
  return mq.llt().solve(Mat::Identity(def_.n, def_.n));
}

std::vector<Mat> MechanicalSystem::inv_mass_jacobian(const Vec& q) const {
  if (!def_.mass_jacobian) return inv_mass_jacobian_fd(q);
  return inv_mass_jacobian(q, inv_mass(q));
}

std::vector<Mat> MechanicalSystem::inv_mass_jacobian(const Vec& q, const Mat& minv) const {
  if (!def_.mass_jacobian) return inv_mass_jacobian_fd(q);
  std::vector<Mat> dm = def_.mass_jacobian(q);
  for (auto& d : dm) d = -minv * d * minv;
  return dm;
}

std::vector<Mat> MechanicalSystem::inv_mass_jacobian_fd(const Vec& q) const {
  std::vector<Mat> out;
  out.reserve(def_.n);
  for (int k = 0; k < def_.n; ++k) {
    if (def_.mass_coord && *def_.mass_coord != k) {
      out.push_back(Mat::Zero(def_.n, def_.n));
      continue;
    }
    const double h = 1e-6 * (1.0 + std::abs(q(k)));
    Vec qp = q, qm = q;
    qp(k) += h;
    qm(k) -= h;
    out.push_back((inv_mass(qp) - inv_mass(qm)) / (2.0 * h));
  }
  return out;
}

double MechanicalSystem::kinetic(const Vec& q, const Vec& p) const {
  return 0.5 * p.dot(inv_mass(q) * p);
}

double MechanicalSystem::hamiltonian(const PhaseState& s) const {
  return kinetic(s.q, s.p) + potential(s.q);
}

Mat MechanicalSystem::input_map() const {
  Mat g = Mat::Zero(def_.n, def_.m);
  g.topRows(def_.m).setIdentity();
  return g;
}

Mat MechanicalSystem::annihilator() const {
  Mat g = Mat::Zero(def_.n - def_.m, def_.n);
  g.rightCols(def_.n - def_.m).setIdentity();
  return g;
}

Mat BlockPartition::reassemble() const {
  const auto m = b11.rows();
  const auto r = b22.rows();
  Mat a(m + r, m + r);
  a.topLeftCorner(m, m) = b11;
  a.topRightCorner(m, r) = b12 ? *b12 : Mat(b21.transpose());
  a.bottomLeftCorner(r, m) = b21;
  a.bottomRightCorner(r, r) = b22;
  return a;
}

BlockPartition partition_matrix(int m, const Mat& a, bool with_b12) {
  if (a.rows() != a.cols() || m <= 0 || m >= a.rows()) {
    throw DimensionError(fmt::format("partition_matrix: cannot split a {}x{} matrix at {}", a.rows(), a.cols(), m));
  }
  const auto r = a.rows() - m;
  BlockPartition out{a.topLeftCorner(m, m), a.bottomLeftCorner(r, m), a.bottomRightCorner(r, r), std::nullopt};
  if (with_b12) out.b12 = a.topRightCorner(m, r);
  return out;
}

BlockPartition partition_matrix(const MechanicalSystem& sys, const Mat& a, bool with_b12) {
  if (a.rows() != sys.n()) {
    throw DimensionError(fmt::format("partition_matrix: matrix is {}x{}, system has n = {}", a.rows(), a.cols(), sys.n()));
  }
  return partition_matrix(sys.m(), a, with_b12);
}

Mat inv_mass_times_p_jacobian(const std::vector<Mat>& dminv, const Vec& p) {
  const auto n = p.size();
  Mat jac(n, n);
  for (Eigen::Index k = 0; k < n; ++k) jac.col(k) = dminv[static_cast<std::size_t>(k)] * p;
  return jac;
}

Vec kinetic_gradient(const MechanicalSystem& sys, const Vec& q, const Vec& p) {
  const Mat jac = inv_mass_times_p_jacobian(sys.inv_mass_jacobian(q), p);
  return 0.5 * jac.transpose() * p;
}

Mat compute_E(const MechanicalSystem& sys, const PhaseState& s) {
  const Mat jac = inv_mass_times_p_jacobian(sys.inv_mass_jacobian(s.q), s.p);
  return 0.5 * jac.transpose() * sys.mass(s.q);
}

PhaseRate open_loop_rhs(const MechanicalSystem& sys, const PhaseState& s, const Vec& u) {
  if (u.size() != sys.m()) {
    throw DimensionError(fmt::format("open_loop_rhs: u has length {}, expected {}", u.size(), sys.m()));
  }
  const Mat minv = sys.inv_mass(s.q);
  PhaseRate r;
  r.qdot = minv * s.p;
  r.pdot = -kinetic_gradient(sys, s.q, s.p) - sys.potential_grad(s.q);
  r.pdot.head(sys.m()) += u;
  return r;
}

}  // namespace phshape
