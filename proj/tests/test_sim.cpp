#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "phshape/errors.hpp"
#include "phshape/sim.hpp"

using namespace phshape;

namespace {

PhaseState state(double q1, double q2, double p1 = 0.0, double p2 = 0.0) {
  PhaseState s{Vec(2), Vec(2)};
  s.q << q1, q2;
  s.p << p1, p2;
  return s;
}

double max_gap(const Trajectory& a, const Trajectory& b) {
  double gap = 0.0;
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
    gap = std::max({gap, (a.q[k] - b.q[k]).cwiseAbs().maxCoeff(), (a.p[k] - b.p[k]).cwiseAbs().maxCoeff()});
  return gap;
}

double max_drift(const Trajectory& t) {
  double d = 0.0;
  for (double x : t.drift) d = std::max(d, x);
  return d;
}

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("sample grid includes the end point") {
    ode::Rhs f = [](double, const Vec& y, Vec& dy) { dy = -y; };
    SimOptions o;
    o.dt_out = 0.3;
    const auto r = integrate_ivp(f, {0.0, 1.0}, Vec::Ones(1), o);
    REQUIRE(r.ok());
    REQUIRE(r.t_out.size() == 5);
    CHECK(r.t_out.back() == 1.0);
    CHECK(r.t_out[3] == doctest::Approx(0.9));
  }

  TEST_CASE("the origin stays at the origin") {
    const auto ctrl = fixtures::cartpole();
    const auto t = simulate_reduced(*ctrl, state(0, 0), 1.0);
    REQUIRE(t.ok());
    CHECK(t.q.back().norm() < 1e-12);
    CHECK(t.p.back().norm() < 1e-12);
  }

  TEST_CASE("cart-pole: closed loop, reduced and interconnected agree") {
    const auto ctrl = fixtures::cartpole();
    const auto& sim = fixtures::cartpole_config().simulation;
    const auto a = simulate_closed_loop(*ctrl, sim.init, sim.t_final, sim.options);
    const auto b = simulate_reduced(*ctrl, sim.init, sim.t_final, sim.options);
    const auto c = simulate_interconnected(*ctrl, sim.init, {}, sim.t_final, sim.options);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    REQUIRE(c.ok());
    CHECK(a.size() == 5001);
    CHECK(max_gap(a, b) <= 1e-8);
    CHECK(max_gap(c, b) <= 1e-6);
    CHECK(max_drift(c) <= 1e-6);
    CHECK(max_energy_increase(b) <= 1e-6);
    CHECK(b.h_d.back() < b.h_d.front());
  }

  TEST_CASE("without damping H_d is conserved") {
    const auto ctrl = fixtures::cartpole();
    const auto undamped = ctrl->with_kd(Mat::Zero(1, 1));
    SimOptions o;
    o.rtol = 1e-11;
    o.atol = 1e-13;
    o.dt_out = 1e-2;
    const auto t = simulate_reduced(undamped, state(0, 0.3), 5.0, o);
    REQUIRE(t.ok());
    double spread = 0.0;
    for (double h : t.h_d) spread = std::max(spread, std::abs(h - t.h_d.front()));
    CHECK(spread <= 1e-6);
  }

  TEST_CASE("energy balance: H_d loss equals the damping integral") {
    const auto ctrl = fixtures::cartpole();
    SimOptions o;
    o.dt_out = 1e-3;
    const auto t = simulate_reduced(*ctrl, state(0, 0.3), 2.0, o);
    REQUIRE(t.ok());
    double dissipated = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const Vec y0 = passive_output(*ctrl, t.q[k], t.p[k]);
      const Vec y1 = passive_output(*ctrl, t.q[k + 1], t.p[k + 1]);
      const double w0 = y0.dot(ctrl->kd() * y0), w1 = y1.dot(ctrl->kd() * y1);
      dissipated += 0.5 * (w0 + w1) * (t.t[k + 1] - t.t[k]);
    }
    CHECK(std::abs(t.h_d.front() - t.h_d.back() - dissipated) <= 1e-4);
  }

  TEST_CASE("acrobot: interconnected and reduced agree over 20 s") {
    const auto ctrl = fixtures::acrobot();
    const auto& sim = fixtures::acrobot_config().simulation;
    const auto b = simulate_reduced(*ctrl, sim.init, sim.t_final, sim.options);
    const auto c = simulate_interconnected(*ctrl, sim.init, {}, sim.t_final, sim.options);
    REQUIRE(b.ok());
    REQUIRE(c.ok());
    CHECK(max_gap(c, b) <= 1e-5);
    CHECK(max_drift(c) <= 1e-5);
    CHECK(max_energy_increase(c) <= 1e-6);
  }

  TEST_CASE("CSV header and precision") {
    const auto ctrl = fixtures::cartpole();
    SimOptions o;
    o.dt_out = 0.05;
    const auto t = simulate_interconnected(*ctrl, state(0, 0.1), {}, 0.1, o);
    std::ostringstream os;
    write_trajectory_csv(os, t);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    CHECK(header == "t,q1,q2,p1,p2,u1,H_d,qa1_1,qa1_2,qa2_1,qa2_2,pa_1,pa_2,drift");
    int rows = 0;
    while (std::getline(is, row)) ++rows;
    CHECK(rows == 3);

    const auto r = simulate_reduced(*ctrl, state(0, 0.1), 0.1, o);
    std::ostringstream os2;
    write_trajectory_csv(os2, r);
    CHECK(os2.str().substr(0, os2.str().find('\n')) == "t,q1,q2,p1,p2,u1,H_d");
    CHECK(os2.str().find("0.10000000000000001") != std::string::npos);
  }

  TEST_CASE("leaving the domain truncates the trajectory") {
    const auto ctrl = fixtures::cartpole();
    // Large pole velocity pushes q2 past the table edge.
    const auto t = simulate_reduced(ctrl->with_kd(Mat::Zero(1, 1)), state(0, 0.3, 0, 3.0), 5.0);
    CHECK(t.status == SimStatus::DomainExit);
    CHECK(t.size() > 0);
    CHECK(t.t.back() < 5.0);
    for (const auto& q : t.q) CHECK(ctrl->contains(q));
  }

  TEST_CASE("starting outside the domain is rejected") {
    const auto ctrl = fixtures::cartpole();
    CHECK_THROWS_AS(simulate_reduced(*ctrl, state(0, 1.0), 1.0), OutOfDomainError);
  }
}
