#include "phshape/ode.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "phshape/errors.hpp"

namespace phshape::ode {
namespace {

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 10.0;

bool eval(const Rhs& f, double t, const Vec& y, Vec& out, std::string& why) {
  try {
    f(t, y, out);
  } catch (const phshape::Error& e) {
    why = e.what();
    return false;
  }
  if (!out.allFinite()) {
    why = fmt::format("non-finite derivative at t = {:.17g}", t);
    return false;
  }
  return true;
}

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, const Options& o) {
  const Vec scale = (o.atol + o.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
  return std::sqrt((err.array() / scale.array()).square().mean());
}

double initial_step(const Rhs& f, double t0, const Vec& y0, const Vec& f0, double dir, const Options& o) {
  const Vec scale = (o.atol + o.rtol * y0.cwiseAbs().array()).matrix();
  const double d0 = std::sqrt((y0.array() / scale.array()).square().mean());
  const double d1n = std::sqrt((f0.array() / scale.array()).square().mean());
  double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  h0 = std::min(h0, o.h_max);
  Vec y1 = y0 + dir * h0 * f0;
  Vec f1(y0.size());
  std::string why;
  if (!eval(f, t0 + dir * h0, y1, f1, why)) return std::max(h0 * 1e-3, o.h_min * 10);
  const double d2 = std::sqrt(((f1 - f0).array() / scale.array()).square().mean()) / h0;
  const double dmax = std::max(d1n, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, o.h_max});
}

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::Completed: return "completed";
    case Status::StepUnderflow: return "step-underflow";
    case Status::RhsFailure: return "rhs-failure";
    case Status::MaxSteps: return "max-steps";
    case Status::StoppedByObserver: return "stopped-by-observer";
  }
  return "unknown";
}

Result integrate(const Rhs& f, double t0, const Vec& y0, double t1, const std::vector<double>& t_eval,
                 const Options& opts, bool keep_nodes, const StepObserver& observer) {
  Result res;
  res.t_reached = t0;
  res.y_reached = y0;
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  const auto n = y0.size();

  std::size_t next_out = 0;
  auto emit_until = [&](double t_hi, auto&& sample) {
    while (next_out < t_eval.size() && dir * (t_eval[next_out] - t_hi) <= 0.0) {
      res.t_out.push_back(t_eval[next_out]);
      res.y_out.push_back(sample(t_eval[next_out]));
      ++next_out;
    }
  };

  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
  std::string why;
  if (!eval(f, t0, y0, k1, why)) {
    res.status = Status::RhsFailure;
    res.message = why;
    return res;
  }
  // Output points at t0 itself.
  emit_until(t0, [&](double) { return y0; });
  if (keep_nodes) res.nodes.push_back({t0, y0, k1});
  if (t0 == t1) return res;

  double t = t0;
  Vec y = y0;
  double h = opts.h_init > 0.0 ? opts.h_init : initial_step(f, t0, y0, k1, dir, opts);
  h = std::max(h, opts.h_min);
  long steps = 0;

  while (dir * (t1 - t) > 0.0) {
    if (++steps > opts.max_steps) {
      res.status = Status::MaxSteps;
      res.message = fmt::format("exceeded {} steps at t = {:.17g}", opts.max_steps, t);
      break;
    }
    bool last = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      last = true;
    }
    if (h < opts.h_min && !last) {
      res.status = why.empty() ? Status::StepUnderflow : Status::RhsFailure;
      res.message = why.empty() ? fmt::format("step size {:.3e} below minimum at t = {:.17g}", h, t)
                                : fmt::format("stopped at t = {:.17g}: {}", t, why);
      break;
    }
    const double hs = dir * h;

    bool stage_ok = true;
    ytmp = y + hs * a21 * k1;
    stage_ok = eval(f, t + c2 * hs, ytmp, k2, why);
    if (stage_ok) {
      ytmp = y + hs * (a31 * k1 + a32 * k2);
      stage_ok = eval(f, t + c3 * hs, ytmp, k3, why);
    }
    if (stage_ok) {
      ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      stage_ok = eval(f, t + c4 * hs, ytmp, k4, why);
    }
    if (stage_ok) {
      ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      stage_ok = eval(f, t + c5 * hs, ytmp, k5, why);
    }
    if (stage_ok) {
      ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      stage_ok = eval(f, t + hs, ytmp, k6, why);
    }
    if (stage_ok) {
      ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      stage_ok = eval(f, t + hs, ynew, k7, why);
    }
    if (!stage_ok) {
      ++res.rejected;
      h *= 0.25;
      continue;
    }

    const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, ynew, opts);
    if (!(en <= 1.0)) {
      ++res.rejected;
      const double fac = std::isfinite(en) ? std::max(kFacMin, kSafety * std::pow(en, -0.2)) : kFacMin;
      h *= fac;
      continue;
    }
    why.clear();

    // Accepted: dense output on [t, t + hs].
    const Vec ydiff = ynew - y;
    const Vec bspl = hs * k1 - ydiff;
    const Vec r4 = ydiff - hs * k7 - bspl;
    const Vec r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    const double t_new = last ? t1 : t + hs;
    emit_until(t_new, [&](double ts) -> Vec {
      if (ts == t_new) return ynew;
      const double th = (ts - t) / hs;
      const double th1 = 1.0 - th;
      return y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)));
    });

    t = t_new;
    y = ynew;
    k1 = k7;
    ++res.accepted;
    res.t_reached = t;
    res.y_reached = y;
    if (keep_nodes) res.nodes.push_back({t, y, k1});
    if (observer && !observer(t, y, k1)) {
      res.status = Status::StoppedByObserver;
      res.message = fmt::format("observer stopped integration at t = {:.17g}", t);
      break;
    }

    const double fac = en == 0.0 ? kFacMax : std::clamp(kSafety * std::pow(en, -0.2), kFacMin, kFacMax);
    h = std::min(h * fac, opts.h_max);
  }
  return res;
}

}  // namespace phshape::ode
