#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "phshape/cli.hpp"
#include "phshape/controller.hpp"

using namespace phshape;

namespace {

Vec at(double q1, double q2) {
  Vec q(2);
  q << q1, q2;
  return q;
}

using Ctrl = std::shared_ptr<const ShapedController>;

std::vector<Ctrl> both() { return {fixtures::cartpole(), fixtures::acrobot()}; }

// Constant mass with a constant added mass; nothing depends on momentum shape.
ShapedController constant_mass_controller() {
  MechanicalSystem::Definition def;
  def.name = "constant";
  def.n = 2;
  def.m = 1;
  def.mass_coord = 1;
  def.mass = [](const Vec&) { return Mat((Mat(2, 2) << 2, 0.5, 0.5, 1).finished()); };
  def.potential = [](const Vec& q) { return -0.5 * q(1) * q(1); };
  def.potential_grad = [](const Vec& q) { return at(0.0, -q(1)); };
  MechanicalSystem sys(std::move(def));
  // The matching ODE is degenerate for constant M, so tabulate the constant directly.
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(-1.0 + 0.1 * k);
  Mat values(21, 2);
  values.col(0).setConstant(-1.0);
  values.col(1).setConstant(8.0);
  AddedMassTable table(2, 1, 1, constant_free_function(Mat::Zero(1, 1)),
                       HermiteTable(grid, values, Mat::Zero(21, 2)));
  PotentialSpec spec;
  spec.init = Vec::Zero(1);
  spec.kappa = 1.0;
  auto pot = synthesize_potential(sys, table, spec);
  return ShapedController(std::move(sys), std::move(table), std::move(pot), Mat::Constant(1, 1, 1.0));
}

}  // namespace

TEST_SUITE("controller") {
  TEST_CASE("J and J2 are skew at random states") {
    for (const auto& ctrl : both()) {
      double worst = 0.0;
      for (const auto& s : cli::random_states(*ctrl, 200, 11)) {
        worst = std::max(worst, skew_defect(assemble_J(*ctrl, s.q, s.p)));
        worst = std::max(worst, skew_defect(assemble_J2(*ctrl, s.q, s.p)));
      }
      CHECK(worst <= 1e-10);
    }
  }

  TEST_CASE("J11 is zero and D(J - Y) = 0") {
    for (const auto& ctrl : both()) {
      double worst = 0.0;
      for (const auto& s : cli::random_states(*ctrl, 200, 12)) {
        const auto t = control_terms(*ctrl, s.q, s.p);
        const Mat j = assemble_J(ctrl->sys(), t);
        CHECK(std::abs(j(0, 0)) == 0.0);
        const Mat d = compute_D(ctrl->sys(), t.added.value, s.q);
        worst = std::max(worst, fixtures::max_abs(Mat(d * (j - t.y.y))));
      }
      CHECK(worst <= 1e-8);
    }
  }

  TEST_CASE("constant mass and added mass give J = J2 = 0") {
    const auto ctrl = constant_mass_controller();
    for (const auto& s : cli::random_states(ctrl, 20, 18)) {
      CHECK(fixtures::max_abs(assemble_J(ctrl, s.q, s.p)) == 0.0);
      CHECK(fixtures::max_abs(assemble_J2(ctrl, s.q, s.p)) == 0.0);
    }
  }

  TEST_CASE("damping examples") {
    const auto ctrl = fixtures::cartpole();
    CHECK(damping(*ctrl, at(0, 0.1), at(0, 0)).norm() == 0.0);
    CHECK(damping(*ctrl, at(0, 0), at(1, 0))(0) == doctest::Approx(-5.0).epsilon(1e-12));
  }

  TEST_CASE("controller potential gradient in q_a1 is -grad V") {
    for (const auto& ctrl : both()) {
      for (const auto& s : cli::random_states(*ctrl, 10, 19)) {
        const Vec g = cbi_hamiltonian_grad(*ctrl, {s.q, s.q, s.p});
        CHECK((g.head(2) + ctrl->sys().potential_grad(s.q)).norm() == 0.0);
      }
    }
  }

  TEST_CASE("control vanishes at the origin") {
    for (const auto& ctrl : both()) {
      const Vec u = control_law(*ctrl, at(0, 0), at(0, 0), Vec::Zero(1));
      CHECK(std::abs(u(0)) < 1e-10);
      const auto r = reduced_dynamics(*ctrl, at(0, 0), at(0, 0), Vec::Zero(1));
      CHECK(r.qdot.norm() < 1e-12);
      CHECK(r.pdot.norm() < 1e-10);
    }
  }

  TEST_CASE("closed-form and dual-path controls agree") {
    for (const auto& ctrl : both()) {
      double worst = 0.0;
      for (const auto& s : cli::random_states(*ctrl, 200, 13)) {
        const Vec v = damping(*ctrl, s.q, s.p);
        const Vec a = control_law(*ctrl, s.q, s.p, v);
        const Vec b = control_law_dual(*ctrl, s.q, s.p, v);
        worst = std::max(worst, (a - b).norm() / std::max(1.0, a.norm()));
      }
      CHECK(worst <= 1e-9);
    }
  }

  TEST_CASE("damping injection is -K_d times the passive output") {
    const auto ctrl = fixtures::cartpole();
    const Vec q = at(0.1, 0.2), p = at(0.3, -0.4);
    const Vec y = passive_output(*ctrl, q, p);
    const Mat mdinv = ctrl->sys().inv_mass(q) + ctrl->mass().at(0.2).full();
    CHECK(y(0) == doctest::Approx((mdinv * p)(0)).epsilon(1e-14));
    CHECK(damping(*ctrl, q, p)(0) == doctest::Approx(-5.0 * y(0)).epsilon(1e-14));
  }

  TEST_CASE("plant with the control law reproduces the reduced vector field") {
    for (const auto& ctrl : both()) {
      double worst = 0.0;
      for (const auto& s : cli::random_states(*ctrl, 200, 14)) {
        const Vec v = damping(*ctrl, s.q, s.p);
        const auto plant = open_loop_rhs(ctrl->sys(), s, control_law(*ctrl, s.q, s.p, v));
        const auto red = reduced_dynamics(*ctrl, s.q, s.p, v);
        Vec a(4), b(4);
        a << plant.qdot, plant.pdot;
        b << red.qdot, red.pdot;
        worst = std::max(worst, (a - b).norm() / std::max(1.0, a.norm()));
      }
      CHECK(worst <= 1e-8);
    }
  }

  TEST_CASE("H_d decreases along the damped reduced flow") {
    for (const auto& ctrl : both()) {
      for (const auto& s : cli::random_states(*ctrl, 50, 15)) {
        const auto t = control_terms(*ctrl, s.q, s.p);
        const auto r = reduced_dynamics(*ctrl, s.q, s.p, damping(*ctrl, s.q, s.p));
        const Vec grad_p = (t.minv + t.ma) * s.p;
        const double rate = (t.grad_t + t.grad_ta + t.grad_vd).dot(r.qdot) + grad_p.dot(r.pdot);
        const Vec y = passive_output(*ctrl, s.q, s.p);
        const double power = y.dot(ctrl->kd() * y);
        CHECK(std::abs(rate + power) <= 1e-9 * std::max(1.0, power));
      }
    }
  }

  TEST_CASE("CbI structure has a zero K33 block and a dissipative symmetric part") {
    for (const auto& ctrl : both()) {
      for (const auto& s : cli::random_states(*ctrl, 20, 16)) {
        const Mat k = cbi_structure(*ctrl, s.q, s.p);
        CHECK(k.rows() == 9);
        CHECK(k(8, 8) == 0.0);
        CHECK(max_sym_eig(k) <= 1e-10);
      }
    }
  }

  TEST_CASE("on the Casimir manifold the controller tracks the plant") {
    for (const auto& ctrl : both()) {
      const auto& sys = ctrl->sys();
      for (const auto& s : cli::random_states(*ctrl, 50, 17)) {
        const CbIControllerState cs{s.q, s.q, s.p};
        const Vec qdot = sys.inv_mass(s.q) * s.p;
        const auto out = cbi_controller_dynamics(*ctrl, cs, qdot, Vec::Zero(1));
        CHECK((out.rate.q_a1 - qdot).norm() < 1e-12);
        CHECK((out.rate.q_a2 - qdot).norm() < 1e-10);
        // Only the actuated direction carries force.
        CHECK(std::abs(out.y_c1(1)) < 1e-8 * std::max(1.0, out.y_c1.norm()));
        const Vec pdot = open_loop_rhs(sys, s, Vec::Zero(1)).pdot - out.y_c1;
        CHECK((out.rate.p_a - pdot).norm() < 1e-8 * std::max(1.0, pdot.norm()));
        const auto red = reduced_dynamics(*ctrl, s.q, s.p, Vec::Zero(1));
        CHECK((out.rate.p_a - red.pdot).norm() < 1e-8 * std::max(1.0, pdot.norm()));
        CHECK(cbi_hamiltonian(*ctrl, cs) == doctest::Approx(shaped_energy(*ctrl, s.q, s.p) -
                                                            sys.hamiltonian(s)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("with_kd keeps the tables") {
    const auto ctrl = fixtures::cartpole();
    const auto other = ctrl->with_kd(Mat::Constant(1, 1, 2.0));
    CHECK(other.kd()(0, 0) == 2.0);
    CHECK(other.mass().size() == ctrl->mass().size());
    CHECK(other.lo() == ctrl->lo());
  }
}
