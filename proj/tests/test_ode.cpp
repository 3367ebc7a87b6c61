#include <doctest.h>

#include <cmath>
#include <numbers>

#include "phshape/errors.hpp"
#include "phshape/hermite.hpp"
#include "phshape/ode.hpp"

using namespace phshape;

TEST_SUITE("ode") {
  TEST_CASE("exponential decay") {
    ode::Rhs f = [](double, const Vec& y, Vec& dy) { dy = -y; };
    ode::Options o;
    o.rtol = 1e-12;
    o.atol = 1e-14;
    const auto r = ode::integrate(f, 0.0, Vec::Ones(1), 1.0, {0.5, 1.0}, o);
    REQUIRE(r.ok());
    REQUIRE(r.y_out.size() == 2);
    CHECK(std::abs(r.y_out[0](0) - std::exp(-0.5)) < 1e-9);
    CHECK(std::abs(r.y_out[1](0) - std::exp(-1.0)) < 1e-9);
  }

  TEST_CASE("backward integration") {
    ode::Rhs f = [](double, const Vec& y, Vec& dy) { dy = y; };
    const auto r = ode::integrate(f, 1.0, Vec::Ones(1), 0.0, {0.0});
    REQUIRE(r.ok());
    CHECK(std::abs(r.y_out[0](0) - std::exp(-1.0)) < 1e-8);
  }

  TEST_CASE("harmonic oscillator energy over 100 periods") {
    ode::Rhs f = [](double, const Vec& y, Vec& dy) {
      dy.resize(2);
      dy << y(1), -y(0);
    };
    ode::Options o;
    o.rtol = 1e-10;
    const double period = 2 * std::numbers::pi;
    std::vector<double> ts;
    for (int k = 1; k <= 100; ++k) ts.push_back(k * period);
    Vec y0(2);
    y0 << 1, 0;
    const auto r = ode::integrate(f, 0.0, y0, 100 * period, ts, o);
    REQUIRE(r.ok());
    double drift = 0.0;
    for (const auto& y : r.y_out) drift = std::max(drift, std::abs(0.5 * y.squaredNorm() - 0.5));
    CHECK(drift <= 1e-8);
  }

  TEST_CASE("error shrinks with the tolerance") {
    ode::Rhs f = [](double t, const Vec& y, Vec& dy) { dy = Vec::Constant(1, std::cos(t) * y(0)); };
    const double exact = std::exp(std::sin(3.0));
    double prev = 1.0;
    for (double tol : {1e-5, 1e-8, 1e-11}) {
      ode::Options o;
      o.rtol = tol;
      o.atol = tol;
      const auto r = ode::integrate(f, 0.0, Vec::Ones(1), 3.0, {3.0}, o);
      REQUIRE(r.ok());
      const double err = std::abs(r.y_out[0](0) - exact);
      CHECK(err < 100 * tol);
      CHECK(err <= prev);
      prev = err;
    }
  }

  TEST_CASE("throwing right-hand side approaches the boundary") {
    // y' = 1 defined only for y < 0.5.
    ode::Rhs f = [](double, const Vec& y, Vec& dy) {
      if (y(0) >= 0.5) throw DomainBoundaryError("outside", y(0));
      dy = Vec::Ones(1);
    };
    ode::Options o;
    o.h_min = 1e-10;
    const auto r = ode::integrate(f, 0.0, Vec::Zero(1), 1.0, {0.25, 1.0}, o);
    CHECK(r.status == ode::Status::RhsFailure);
    CHECK(r.y_out.size() == 1);
    CHECK(r.t_reached == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.t_reached < 0.5);
  }

  TEST_CASE("observer stops the run") {
    ode::Rhs f = [](double, const Vec&, Vec& dy) { dy = Vec::Ones(1); };
    const auto r = ode::integrate(f, 0.0, Vec::Zero(1), 10.0, {}, {}, true,
                                  [](double t, const Vec&, const Vec&) { return t < 2.0; });
    CHECK(r.status == ode::Status::StoppedByObserver);
    CHECK(r.t_reached >= 2.0);
    CHECK(r.nodes.front().t == 0.0);
  }
}

TEST_SUITE("hermite") {
  TEST_CASE("cubics are reproduced exactly") {
    std::vector<double> grid{-1.0, -0.3, 0.2, 1.0};
    Mat v(4, 1), d(4, 1);
    const auto p = [](double x) { return 2 * x * x * x - x + 0.5; };
    const auto dp = [](double x) { return 6 * x * x - 1; };
    for (int i = 0; i < 4; ++i) {
      v(i, 0) = p(grid[i]);
      d(i, 0) = dp(grid[i]);
    }
    const HermiteTable t(grid, v, d);
    for (double x : {-1.0, -0.7, 0.0, 0.55, 1.0}) {
      const auto [val, der] = t.eval(x);
      CHECK(val(0) == doctest::Approx(p(x)).epsilon(1e-13));
      CHECK(der(0) == doctest::Approx(dp(x)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(t.eval(1.0 + 1e-9), OutOfDomainError);
    CHECK_THROWS_AS(t.eval(-1.5), OutOfDomainError);
  }

  TEST_CASE("tabulated ODE solution matches the exact one") {
    ode::Rhs f = [](double x, const Vec& y, Vec& dy) {
      dy.resize(2);
      dy << y(1), -y(0) + 0 * x;
    };
    std::vector<double> grid;
    for (int k = -100; k <= 100; ++k) grid.push_back(0.01 * k);
    Vec y0(2);
    y0 << 0, 1;
    const auto sol = tabulate_ode(f, grid, 100, y0, 1e-10);
    CHECK(sol.lo_complete);
    CHECK(sol.hi_complete);
    double err = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const double x = -1.0 + 2e-3 * k;
      const auto [val, der] = sol.table.eval(x);
      err = std::max({err, std::abs(val(0) - std::sin(x)), std::abs(der(0) - std::cos(x))});
    }
    CHECK(err < 1e-8);
  }
}
