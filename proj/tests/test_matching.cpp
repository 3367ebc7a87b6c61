#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "phshape/matching.hpp"
#include "phshape/systems.hpp"

using namespace phshape;

namespace {

MechanicalSystem constant_mass_system() {
  MechanicalSystem::Definition def;
  def.name = "constant";
  def.n = 2;
  def.m = 1;
  def.mass_coord = 1;
  def.mass = [](const Vec&) { return Mat((Mat(2, 2) << 2, 0.5, 0.5, 1).finished()); };
  def.potential = [](const Vec& q) { return 0.5 * q.squaredNorm(); };
  def.potential_grad = [](const Vec& q) { return q; };
  return MechanicalSystem(std::move(def));
}

AddedMassState cartpole_state(double q_i) {
  AddedMassState s;
  s.q_i = q_i;
  s.m_a11 = Mat::Zero(1, 1);
  s.m_a21 = Mat::Constant(1, 1, -2.0);
  s.m_a22 = Mat::Constant(1, 1, 8.0);
  return s;
}

Vec at(double q1, double q2) {
  Vec q(2);
  q << q1, q2;
  return q;
}

}  // namespace

TEST_SUITE("matching") {
  TEST_CASE("Y vanishes for a constant mass and a constant M_a") {
    const auto sys = constant_mass_system();
    AddedMassJet jet;
    jet.value = cartpole_state(0.3);
    jet.deriv = cartpole_state(0.3);
    jet.deriv.m_a11.setZero();
    jet.deriv.m_a21.setZero();
    jet.deriv.m_a22.setZero();
    const auto y = compute_Y(sys, jet, at(0.1, 0.3), at(0.7, -1.1));
    CHECK(fixtures::max_abs(y.y) == 0.0);
    CHECK(ke_residual(sys, jet).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("D for the cart-pole at the origin") {
    const auto sys = systems::cart_pole();
    AddedMassState zero = cartpole_state(0.0);
    zero.m_a21.setZero();
    zero.m_a22.setZero();
    CHECK(fixtures::max_abs(Mat(compute_D(sys, zero, at(0, 0)) - Mat((Mat(1, 2) << -1, -1).finished()))) < 1e-15);
    CHECK(fixtures::max_abs(Mat(compute_D(sys, cartpole_state(0.0), at(0, 0)) -
                                Mat((Mat(1, 2) << -3, -1).finished()))) < 1e-15);
  }

  TEST_CASE("cart-pole Schur terms and lambda_min at the origin") {
    const auto sys = systems::cart_pole();
    const auto s = schur_terms(sys, cartpole_state(0.0), at(0, 0));
    CHECK(std::abs(s.s1(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(s.s2(0, 0) + 2.0) < 1e-12);
    CHECK(std::abs(s.s3(0, 0) - 1.0) < 1e-12);
    const double oracle = (11.0 - std::sqrt(81.0 + 36.0)) / 2.0;
    CHECK(std::abs(lambda_min(sys, cartpole_state(0.0)) - oracle) < 1e-12);
  }

  TEST_CASE("cart-pole matching derivatives against symbolic values") {
    const auto sys = systems::cart_pole();
    const auto free = constant_free_function(Mat::Zero(1, 1));
    const auto jet = ke_ode_rhs(sys, free, 0.1, cartpole_state(0.1));
    CHECK(std::abs(jet.deriv.m_a21(0, 0) - 0.58619547488703494) < 1e-12);
    CHECK(std::abs(jet.deriv.m_a22(0, 0) + 2.7479483715921305) < 1e-12);
    const auto jet0 = ke_ode_rhs(sys, free, 0.0, cartpole_state(0.0));
    CHECK(std::abs(jet0.deriv.m_a21(0, 0)) < 1e-14);
    CHECK(std::abs(jet0.deriv.m_a22(0, 0)) < 1e-14);
  }

  TEST_CASE("zero added mass is a fixed point") {
    const auto sys = systems::cart_pole();
    AddedMassState zero = cartpole_state(0.2);
    zero.m_a21.setZero();
    zero.m_a22.setZero();
    const auto jet = ke_ode_rhs(sys, constant_free_function(Mat::Zero(1, 1)), 0.2, zero);
    CHECK(fixtures::max_abs(jet.dfull()) < 1e-14);
  }

  TEST_CASE("acrobot with constant M_d: derivatives cancel those of M^{-1}") {
    const auto& cfg = fixtures::acrobot_config();
    const auto sys = cfg.make_system();
    const auto free = cfg.make_free_function(sys);
    const Mat md_inv = cfg.synthesis.free.md_inv;
    for (double q1 : {-2.0, -0.4, 0.0, 0.9, 2.5}) {
      const Vec q = configuration_at(sys, q1);
      const auto state = AddedMassState::from_full(q1, Mat(md_inv - sys.inv_mass(q)), 1);
      const auto jet = ke_ode_rhs(sys, free, q1, state);
      const Mat dminv = sys.inv_mass_jacobian(q)[0];
      CHECK(std::abs(jet.deriv.m_a21(0, 0) + dminv(1, 0)) < 1e-10);
      CHECK(std::abs(jet.deriv.m_a22(0, 0) + dminv(1, 1)) < 1e-10);
    }
  }

  TEST_CASE("Y slices sum to Y") {
    const auto ctrl = fixtures::cartpole();
    const auto& sys = ctrl->sys();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (int k = 0; k < 20; ++k) {
      const Vec q = at(u(rng), u(rng));
      const Vec p = at(u(rng), u(rng));
      const auto y = compute_Y(sys, ctrl->mass().at(q(1)), q, p);
      Mat sum = Mat::Zero(2, 2);
      for (int i = 0; i < 2; ++i) sum += p(i) * y.slices[i];
      CHECK(fixtures::max_abs(Mat(sum - y.y)) < 1e-13);
    }
  }

  TEST_CASE("cart-pole table: domain, s1 and residuals") {
    const auto ctrl = fixtures::cartpole();
    const auto& sys = ctrl->sys();
    const auto& t = ctrl->mass();
    CHECK(std::abs(t.lo() + 0.48) <= 0.02);
    CHECK(std::abs(t.hi() - 0.48) <= 0.02);
    CHECK(t.lo_edge == EdgeKind::Boundary);
    CHECK(t.hi_edge == EdgeKind::Boundary);

    double node_res = 0.0, min_s1 = 1e300;
    for (std::size_t k = 0; k < t.size(); k += 1) {
      const auto jet = t.node(k);
      node_res = std::max(node_res, ke_residual(sys, jet).cwiseAbs().maxCoeff());
      if (k % 50 == 0)
        min_s1 = std::min(min_s1, schur_terms(sys, jet.value, configuration_at(sys, jet.value.q_i)).s1(0, 0));
    }
    CHECK(node_res <= 1e-7);
    CHECK(min_s1 > 0.0);

    double interp_res = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const double x = t.lo() + (t.hi() - t.lo()) * (k + 0.5) / 1000.0;
      interp_res = std::max(interp_res, ke_residual(sys, t.at(x)).cwiseAbs().maxCoeff());
    }
    CHECK(interp_res <= 1e-5);
  }

  TEST_CASE("re-integration at half tolerance agrees") {
    const auto& cfg = fixtures::cartpole_config();
    const auto sys = cfg.make_system();
    auto opts = cfg.synthesis.options;
    opts.rtol /= 2;
    opts.atol /= 2;
    const auto fine = integrate_ke(sys, cfg.make_free_function(sys), cfg.synthesis.init, {-0.45, 0.45}, opts);
    const auto& base = fixtures::cartpole()->mass();
    double gap = 0.0;
    for (int k = 0; k <= 90; ++k) {
      const double x = -0.45 + 0.01 * k;
      gap = std::max(gap, fixtures::max_abs(Mat(fine.at(x).full() - base.at(x).full())));
    }
    CHECK(gap <= 1e-6);
  }

  TEST_CASE("acrobot table keeps M^{-1} + M_a^{-1} constant") {
    const auto ctrl = fixtures::acrobot();
    const auto& sys = ctrl->sys();
    const auto& t = ctrl->mass();
    CHECK(t.lo() == doctest::Approx(-std::numbers::pi));
    CHECK(t.hi() == doctest::Approx(std::numbers::pi));
    const Mat target = fixtures::acrobot_config().synthesis.free.md_inv;
    double dev = 0.0;
    for (int k = 0; k <= 200; ++k) {
      const double x = t.lo() + (t.hi() - t.lo()) * k / 200.0;
      dev = std::max(dev, fixtures::max_abs(Mat(sys.inv_mass(configuration_at(sys, x)) + t.at(x).full() - target)));
    }
    CHECK(dev <= 1e-8);
  }

  TEST_CASE("pack and unpack are inverse") {
    AddedMassState s;
    s.m_a21 = Mat::Constant(1, 1, 0.25);
    s.m_a22 = Mat::Constant(1, 1, -3.5);
    AddedMassState r;
    unpack_unknowns(pack_unknowns(s), 2, 1, r);
    CHECK(r.m_a21 == s.m_a21);
    CHECK(r.m_a22 == s.m_a22);
  }
}

TEST_SUITE("matching") {
  TEST_CASE("zero added mass: Y, residuals and Schur terms") {
    const auto sys = systems::cart_pole();
    AddedMassJet jet;
    jet.value = cartpole_state(0.3);
    jet.value.m_a21.setZero();
    jet.value.m_a22.setZero();
    jet.deriv = jet.value;
    const Vec q = at(0.0, 0.3);
    CHECK(fixtures::max_abs(compute_Y(sys, jet, q, at(0.4, -0.9)).y) == 0.0);
    CHECK(ke_residual(sys, jet).cwiseAbs().maxCoeff() == 0.0);

    const auto s = schur_terms(sys, jet.value, q);
    const Mat minv = sys.inv_mass(q);
    CHECK(std::abs(s.s1(0, 0) - (minv(1, 1) - minv(1, 0) * minv(0, 1) / minv(0, 0))) < 1e-14);
    CHECK(std::abs(s.s2(0, 0)) < 1e-14);
    CHECK(std::abs(s.s3(0, 0) + s.s1(0, 0)) < 1e-14);
  }

  TEST_CASE("m_a21 = -m21 gives D = [0, -I]") {
    const auto sys = systems::cart_pole();
    const Vec q = at(0.0, 0.2);
    AddedMassState s = cartpole_state(0.2);
    s.m_a11 = Mat::Constant(1, 1, 0.7);
    s.m_a21 = Mat::Constant(1, 1, -sys.inv_mass(q)(1, 0));
    const Mat d = compute_D(sys, s, q);
    CHECK(std::abs(d(0, 0)) < 1e-15);
    CHECK(d(0, 1) == -1.0);
  }

  TEST_CASE("constant mass: a constant added mass is a fixed point") {
    const auto sys = constant_mass_system();
    const auto jet = ke_ode_rhs(sys, constant_free_function(Mat::Constant(1, 1, 0.3)), 0.5, cartpole_state(0.5));
    CHECK(fixtures::max_abs(jet.dfull()) == 0.0);
  }

  TEST_CASE("Y against a finite-difference construction") {
    const auto ctrl = fixtures::cartpole();
    const auto& sys = ctrl->sys();
    const auto& t = ctrl->mass();
    for (double q2 : {0.0, 0.1, -0.3}) {
      const Vec q = at(0.2, q2), p = at(0.6, -1.1);
      const double h = 1e-6;
      // Columns of d(M^{-1}p)/dq and d(M_a^{-1}p)/dq; M_a depends on q2 only.
      Mat jm(2, 2), ja = Mat::Zero(2, 2);
      for (int k = 0; k < 2; ++k) {
        Vec a = q, b = q;
        a(k) += h;
        b(k) -= h;
        jm.col(k) = (sys.inv_mass(a) * p - sys.inv_mass(b) * p) / (2 * h);
      }
      ja.col(1) = (t.at(q2 + h).full() * p - t.at(q2 - h).full() * p) / (2 * h);
      const Mat expected = 0.5 * sys.inv_mass(q) * ja.transpose() - 0.5 * jm * t.at(q2).full();
      CHECK(fixtures::max_abs(Mat(compute_Y(sys, t.at(q2), q, p).y - expected)) < 1e-6);
    }
  }

  TEST_CASE("cart-pole s1/s3 is positive near the origin") {
    const auto ctrl = fixtures::cartpole();
    for (double x : {-0.2, -0.05, 0.0, 0.05, 0.2}) {
      const auto s = schur_terms(ctrl->sys(), ctrl->mass().at(x).value, at(0, x));
      CHECK(s.s1(0, 0) / s.s3(0, 0) > 0.0);
    }
  }
}
