#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "phshape/errors.hpp"
#include "phshape/potential.hpp"

using namespace phshape;

namespace {

Vec at(double q1, double q2) {
  Vec q(2);
  q << q1, q2;
  return q;
}

Vec fd_grad(const ShapedPotential& pot, const Vec& q) {
  Vec g(q.size());
  for (int k = 0; k < q.size(); ++k) {
    const double h = 1e-6;
    Vec a = q, b = q;
    a(k) += h;
    b(k) -= h;
    g(k) = (eval_Vd(pot, a).first - eval_Vd(pot, b).first) / (2 * h);
  }
  return g;
}

void check_fd_gradient(const ShapedController& ctrl, unsigned seed) {
  const auto& pot = ctrl.potential();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ui(0.9 * pot.lo(), 0.9 * pot.hi());
  std::uniform_real_distribution<double> uo(-0.4, 0.4);
  const int ci = pot.coord;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    Vec q(2);
    q(ci) = ui(rng);
    q(1 - ci) = uo(rng);
    const Vec g = eval_Vd(pot, q).second;
    const Vec fd = fd_grad(pot, q);
    worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
  }
  CHECK(worst <= 1e-5);
}

void check_local_minimum(const ShapedController& ctrl) {
  const auto& pot = ctrl.potential();
  const double v0 = eval_Vd(pot, at(0, 0)).first;
  CHECK(eval_Vd(pot, at(0, 0)).second.norm() < 1e-9);
  int violations = 0;
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j) {
      if (i == 0 && j == 0) continue;
      const Vec q = at(0.02 * i, 0.02 * j);
      if (!pot.contains(q(pot.coord))) continue;
      if (!(eval_Vd(pot, q).first > v0)) ++violations;
    }
  CHECK(violations == 0);
}

}  // namespace

TEST_SUITE("potential") {
  TEST_CASE("single-ansatz right-hand side") {
    const auto ctrl = fixtures::cartpole();
    const auto& sys = ctrl->sys();
    CHECK(pe_ode_rhs_single(sys, ctrl->mass(), 0.0, 0.0) == 0.0);
    const auto st = schur_terms(sys, ctrl->mass().at(0.1).value, at(0, 0.1));
    const double expected = -(st.s1(0, 0) / st.s3(0, 0)) * sys.potential_grad(at(0, 0.1))(1);
    CHECK(pe_ode_rhs_single(sys, ctrl->mass(), 0.1, 0.0) == doctest::Approx(expected).epsilon(1e-14));
  }

  TEST_CASE("trig-ansatz right-hand side cancels the residual for every q_o") {
    const auto ctrl = fixtures::acrobot();
    const auto& sys = ctrl->sys();
    const double q1 = 0.7, f1 = 1.3, f2 = -4.0;
    const Vec d = pe_ode_rhs_trig(sys, ctrl->mass(), q1, f1, f2);
    for (double qo : {-1.0, 0.0, 0.4, 2.0}) {
      const Vec grad = at(d(0) * std::sin(qo) + d(1) * std::cos(qo), f1 * std::cos(qo) - f2 * std::sin(qo));
      const Vec r = pe_residual(sys, ctrl->mass().at(q1).value, grad, at(q1, qo));
      CHECK(std::abs(r(0)) < 1e-10);
    }
  }

  TEST_CASE("residual factorizations agree") {
    for (const auto& ctrl : {fixtures::cartpole(), fixtures::acrobot()}) {
      const auto& sys = ctrl->sys();
      std::mt19937_64 rng(4);
      std::uniform_real_distribution<double> u(-0.4, 0.4);
      for (int k = 0; k < 50; ++k) {
        const Vec q = at(u(rng), u(rng));
        const Vec g = at(3 * u(rng), 3 * u(rng));
        const auto ma = ctrl->mass().at(q(ctrl->mass().coord())).value;
        CHECK(std::abs(pe_residual(sys, ma, g, q)(0) - pe_residual_d_form(sys, ma, g, q)(0)) < 1e-10);
      }
    }
  }

  TEST_CASE("residual vanishes on the synthesis grids") {
    for (const auto& ctrl : {fixtures::cartpole(), fixtures::acrobot()}) {
      const auto& sys = ctrl->sys();
      const auto& pot = ctrl->potential();
      double worst = 0.0;
      for (double x : pot.vm.grid()) {
        for (double qo : {-0.3, 0.0, 0.25}) {
          Vec q(2);
          q(pot.coord) = x;
          q(1 - pot.coord) = qo;
          const Vec r = pe_residual(sys, ctrl->mass().at(x).value, pot.vm_grad(q), q);
          worst = std::max(worst, r.cwiseAbs().maxCoeff());
        }
      }
      CHECK(worst <= 1e-7);
    }
  }

  TEST_CASE("Gamma for the cart-pole at the origin") {
    const auto ctrl = fixtures::cartpole();
    const Vec beta = gamma_beta(ctrl->sys(), ctrl->mass().at(0.0).value);
    CHECK(std::abs(beta(0) + 1.0) < 1e-12);
    CHECK(std::abs(beta(1) + 2.0) < 1e-12);
    const auto& gamma = ctrl->potential().gamma;
    CHECK(std::abs(gamma.value(at(0, 0))) < 1e-15);
    const Vec g = gamma.grad(at(0, 0));
    CHECK(std::abs(g(0) - 1.0) < 1e-12);
    CHECK(std::abs(g(1) - 2.0) < 1e-12);
  }

  TEST_CASE("Gamma directions drop out of the residual") {
    for (const auto& ctrl : {fixtures::cartpole(), fixtures::acrobot()}) {
      const auto& sys = ctrl->sys();
      const auto& pot = ctrl->potential();
      std::mt19937_64 rng(5);
      std::uniform_real_distribution<double> u(-0.4, 0.4);
      for (int k = 0; k < 50; ++k) {
        const Vec q = at(u(rng), u(rng));
        const auto ma = ctrl->mass().at(q(pot.coord)).value;
        const Vec g = pot.kappa * pot.gamma.value(q) * pot.gamma.grad(q);
        const double lin = pe_residual(sys, ma, g, q)(0) - pe_residual(sys, ma, Vec::Zero(2), q)(0);
        CHECK(std::abs(lin) <= 1e-8 * std::max(1.0, g.norm()));
      }
    }
  }

  TEST_CASE("V_d at the origin") {
    for (const auto& ctrl : {fixtures::cartpole(), fixtures::acrobot()}) {
      const auto& pot = ctrl->potential();
      CHECK(eval_Vd(pot, at(0, 0)).first == doctest::Approx(pot.vm_value(at(0, 0))));
    }
  }

  TEST_CASE("V_d gradient against finite differences") {
    check_fd_gradient(*fixtures::cartpole(), 6);
    check_fd_gradient(*fixtures::acrobot(), 7);
  }

  TEST_CASE("origin is a strict local minimum of V_d") {
    check_local_minimum(*fixtures::cartpole());
    check_local_minimum(*fixtures::acrobot());
  }

  TEST_CASE("V_d outside the domain throws") {
    const auto& pot = fixtures::cartpole()->potential();
    CHECK_THROWS_AS(eval_Vd(pot, at(0.0, 1.0)), OutOfDomainError);
  }
}

TEST_SUITE("potential") {
  TEST_CASE("trig right-hand side at the acrobot origin") {
    const auto ctrl = fixtures::acrobot();
    const auto& sys = ctrl->sys();
    const auto& prm = sys.params();
    const auto st = schur_terms(sys, ctrl->mass().at(0.0).value, at(0, 0));
    const double s1 = st.s1(0, 0), s2 = st.s2(0, 0), s3 = st.s3(0, 0), g = prm.at("g");
    const Vec d = pe_ode_rhs_trig(sys, ctrl->mass(), 0.0, 0.0, -50.0);
    const double expected = (prm.at("c4") * g * s1 + prm.at("c5") * g * s1 + s3 * -50.0) / s2;
    CHECK(d(0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(d(1)) < 1e-12);
  }

  TEST_CASE("acrobot residual on a 100 x 100 grid") {
    const auto ctrl = fixtures::acrobot();
    const auto& pot = ctrl->potential();
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j < 100; ++j) {
        const double q1 = i == 99 ? pot.hi() : pot.lo() + (pot.hi() - pot.lo()) * i / 99.0;
        const Vec q = at(q1, -3.0 + 6.0 * j / 99.0);
        const Vec r = pe_residual(ctrl->sys(), ctrl->mass().at(q1).value, pot.vm_grad(q), q);
        worst = std::max(worst, r.cwiseAbs().maxCoeff());
      }
    CHECK(worst <= 1e-7);
  }

  TEST_CASE("zero shaping at an equilibrium gives a zero residual") {
    const auto ctrl = fixtures::cartpole();
    CHECK(pe_residual(ctrl->sys(), ctrl->mass().at(0.0).value, Vec::Zero(2), at(0, 0)).norm() == 0.0);
  }
}
