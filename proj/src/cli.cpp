#include "phshape/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include "phshape/errors.hpp"
#include "phshape/log.hpp"

namespace phshape::cli {
namespace fs = std::filesystem;

namespace {

double max_abs(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

std::string g17(double x) { return fmt::format("{:.17g}", x); }

std::string g17_list(const Mat& a) {
  std::string out;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) out += (out.empty() ? "" : " ") + g17(a(r, c));
  }
  return out;
}

// Configurations at which the potential residual is sampled for one q_i.
std::vector<Vec> pe_samples(const ShapedController& ctrl, double q_i) {
  const auto& pot = ctrl.potential();
  Vec q = configuration_at(ctrl.sys(), q_i);
  if (pot.ansatz == Ansatz::Single) return {q};
  std::vector<Vec> out;
  for (double q_o : {-1.0, -0.3, 0.4, 1.2}) {
    q(pot.other) = q_o;
    out.push_back(q);
  }
  return out;
}

double pe_residual_at(const ShapedController& ctrl, const Vec& q) {
  const auto jet = ctrl.mass().at(q(ctrl.mass().coord()));
  return max_abs(pe_residual(ctrl.sys(), jet.value, ctrl.potential().vm_grad(q), q));
}

CheckItem item(std::string name, double value, double limit) {
  return {std::move(name), value, limit, value <= limit};
}

fs::path out_dir(const Command& cmd) {
  if (!cmd.out.empty()) return cmd.out;
  return fs::path("out") / cmd.config.stem();
}

void print_items(std::ostream& os, const std::vector<CheckItem>& items) {
  for (const auto& it : items) {
    fmt::print(os, "{:<28} {} value={} limit={}\n", it.name, it.pass ? "PASS" : "FAIL", g17(it.value), g17(it.limit));
  }
}

ControllerPackage load_for(const Command& cmd, const RunConfig& cfg) {
  auto pkg = load_package(out_dir(cmd));
  if (pkg.system != cfg.system) {
    throw PackageError(fmt::format("package in '{}' is for '{}', config is for '{}'", out_dir(cmd).string(), pkg.system,
                                   cfg.system));
  }
  return pkg;
}

Trajectory simulate(const ShapedController& ctrl, const RunConfig& cfg, SimMode mode) {
  const auto& s = cfg.simulation;
  if (mode == SimMode::Interconnected) return simulate_interconnected(ctrl, s.init, {}, s.t_final, s.options);
  return simulate_closed_loop(ctrl, s.init, s.t_final, s.options);
}

void write_file(const fs::path& file, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(file);
  if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
  body(out);
  if (!out) throw Error(fmt::format("error while writing '{}'", file.string()));
}

int cmd_synth(const Command& cmd, std::ostream& os) {
  const auto cfg = load_config(cmd.config);
  const auto t0 = std::chrono::steady_clock::now();
  const auto pkg = synthesize(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& ctrl = *pkg.controller;
  const auto& table = ctrl.mass();
  const auto& sys = ctrl.sys();
  save_package(out_dir(cmd), pkg);

  double lam_lo = std::numeric_limits<double>::infinity(), lam_hi = -lam_lo, ke = 0.0, md_dev = 0.0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto jet = table.node(k);
    const double lam = lambda_min(sys, jet.value);
    lam_lo = std::min(lam_lo, lam);
    lam_hi = std::max(lam_hi, lam);
    ke = std::max(ke, max_abs(ke_residual(sys, jet)));
    if (table.free_function().kind == "target_Md") {
      const Mat md_inv = sys.inv_mass(configuration_at(sys, jet.value.q_i)) + jet.full();
      md_dev = std::max(md_dev, max_abs(Mat(md_inv - table.free_function().parameter)));
    }
  }
  double pe = 0.0;
  for (double x : ctrl.potential().vm.grid()) {
    if (!ctrl.mass().contains(x)) continue;
    for (const auto& q : pe_samples(ctrl, x)) pe = std::max(pe, pe_residual_at(ctrl, q));
  }

  fmt::print(os, "system: {}\n", pkg.system);
  fmt::print(os, "package: {}\n", out_dir(cmd).string());
  fmt::print(os, "domain: [{}, {}]\n", g17(ctrl.lo()), g17(ctrl.hi()));
  fmt::print(os, "added_mass_domain: [{}, {}] nodes={}\n", g17(table.lo()), g17(table.hi()), table.size());
  fmt::print(os, "lo_edge: {}\nhi_edge: {}\n", table.lo_reason, table.hi_reason);
  fmt::print(os, "potential_domain: [{}, {}]\n", g17(ctrl.potential().lo()), g17(ctrl.potential().hi()));
  fmt::print(os, "lambda_min: [{}, {}]\n", g17(lam_lo), g17(lam_hi));
  fmt::print(os, "max_ke_residual: {}\n", g17(ke));
  fmt::print(os, "max_pe_residual: {}\n", g17(pe));
  if (table.free_function().kind == "target_Md") fmt::print(os, "max_md_deviation: {}\n", g17(md_dev));
  if (sys.n() == 2 && sys.m() == 1) {
    const auto st = schur_terms(sys, table.init, configuration_at(sys, table.init.q_i));
    fmt::print(os, "s1_s2_s3_at_init: {} {} {}\n", g17(st.s1(0, 0)), g17(st.s2(0, 0)), g17(st.s3(0, 0)));
    if (!(st.s3(0, 0) > 0.0)) {
      fmt::print(os, "warning: s3 = {} is not positive at the initial point; potential shaping may fail\n",
                 g17(st.s3(0, 0)));
    }
  }
  fmt::print(os, "synthesis_seconds: {}\n", g17(seconds));
  return kOk;
}

int cmd_check(const Command& cmd, std::ostream& os) {
  const auto cfg = load_config(cmd.config);
  const auto pkg = load_for(cmd, cfg);
  const auto items = check_controller(*pkg.controller);
  print_items(os, items);
  const bool ok = std::all_of(items.begin(), items.end(), [](const CheckItem& i) { return i.pass; });
  fmt::print(os, "verdict: {}\n", ok ? "PASS" : "FAIL");
  return ok ? kOk : kCheckFailed;
}

int cmd_simulate(const Command& cmd, std::ostream& os) {
  const auto cfg = load_config(cmd.config);
  const auto pkg = load_for(cmd, cfg);
  const auto ctrl = pkg.controller->with_kd(cfg.kd);
  const auto tr = simulate(ctrl, cfg, cmd.mode);
  const auto dir = out_dir(cmd);
  write_file(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, tr); });

  const double inc = max_energy_increase(tr);
  const bool monotone = tr.size() > 1 && inc <= 1e-6 && tr.h_d.back() < tr.h_d.front();
  const auto norm = [&](std::size_t k) { return std::hypot(tr.q[k].norm(), tr.p[k].norm()); };
  fmt::print(os, "system: {}\n", pkg.system);
  fmt::print(os, "mode: {}\n", cmd.mode == SimMode::Interconnected ? "interconnected" : "reduced");
  fmt::print(os, "kappa: {}\n", g17(ctrl.potential().kappa));
  fmt::print(os, "K_d: {}\n", g17_list(ctrl.kd()));
  fmt::print(os, "status: {}\n", to_string(tr.status));
  if (!tr.ok()) fmt::print(os, "message: {}\n", tr.message);
  fmt::print(os, "samples: {}\n", tr.size());
  fmt::print(os, "trajectory: {}\n", (dir / "trajectory.csv").string());
  if (tr.size() == 0) return tr.ok() ? kOk : kDomainExit;
  fmt::print(os, "t_final: {}\n", g17(tr.t.back()));
  fmt::print(os, "initial_state_norm: {}\n", g17(norm(0)));
  fmt::print(os, "final_state_norm: {}\n", g17(norm(tr.size() - 1)));
  fmt::print(os, "final_configuration_norm: {}\n", g17(tr.q.back().norm()));
  fmt::print(os, "H_d: {} -> {}\n", g17(tr.h_d.front()), g17(tr.h_d.back()));
  fmt::print(os, "max_H_d_increase: {}\n", g17(inc));
  fmt::print(os, "H_d_monotone: {}\n", monotone ? "PASS" : "FAIL");
  bool drift_ok = true;
  if (tr.interconnected) {
    const double drift = *std::max_element(tr.drift.begin(), tr.drift.end());
    drift_ok = drift <= 1e-6;
    fmt::print(os, "max_casimir_drift: {}\n", g17(drift));
    fmt::print(os, "casimir_drift: {}\n", drift_ok ? "PASS" : "FAIL");
  }
  if (!tr.ok()) return kDomainExit;
  return monotone && drift_ok ? kOk : kCheckFailed;
}

int cmd_export(const Command& cmd, std::ostream& os) {
  const auto cfg = load_config(cmd.config);
  const auto pkg = load_for(cmd, cfg);
  const auto& ctrl = *pkg.controller;
  const auto dir = out_dir(cmd);
  write_file(dir / "fig_added_mass.csv", [&](std::ostream& o) { export_added_mass(o, ctrl); });
  write_file(dir / "fig_potential.csv", [&](std::ostream& o) { export_potential(o, ctrl); });
  write_file(dir / "fig_vd_grid.csv", [&](std::ostream& o) { export_vd_grid(o, ctrl); });

  const auto traj_file = dir / "trajectory.csv";
  Trajectory tr;
  if (fs::exists(traj_file)) {
    tr = read_trajectory_csv(traj_file);
  } else {
    tr = simulate(ctrl.with_kd(cfg.kd), cfg, cmd.mode);
  }
  write_file(dir / "fig_trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, tr); });
  for (const char* f : {"fig_added_mass.csv", "fig_potential.csv", "fig_vd_grid.csv", "fig_trajectory.csv"}) {
    fmt::print(os, "wrote {}\n", (dir / f).string());
  }
  return kOk;
}

}  // namespace

SimMode parse_mode(const std::string& s) {
  if (s == "reduced") return SimMode::Reduced;
  if (s == "interconnected") return SimMode::Interconnected;
  throw ConfigError(fmt::format("unknown mode '{}' (expected reduced or interconnected)", s));
}

ControllerPackage synthesize(const RunConfig& cfg) {
  auto sys = cfg.make_system();
  const auto free = cfg.make_free_function(sys);
  auto table = integrate_ke(sys, free, cfg.synthesis.init, cfg.synthesis.range, cfg.synthesis.options);
  log::info("added mass on [{:.17g}, {:.17g}] with {} nodes", table.lo(), table.hi(), table.size());
  auto pot = synthesize_potential(sys, table, cfg.potential);
  ControllerPackage pkg;
  pkg.system = cfg.system;
  pkg.params = cfg.params;
  pkg.controller = std::make_shared<const ShapedController>(std::move(sys), std::move(table), std::move(pot), cfg.kd);
  return pkg;
}

std::vector<PhaseState> random_states(const ShapedController& ctrl, int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  const double mid = 0.5 * (ctrl.lo() + ctrl.hi()), half = 0.45 * (ctrl.hi() - ctrl.lo());
  std::uniform_real_distribution<double> qi(mid - half, mid + half), other(-0.4, 0.4), mom(-1.0, 1.0);
  const int n = ctrl.sys().n(), coord = ctrl.mass().coord();
  std::vector<PhaseState> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    PhaseState s{Vec(n), Vec(n)};
    for (int i = 0; i < n; ++i) {
      s.q(i) = i == coord ? qi(rng) : other(rng);
      s.p(i) = mom(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CheckItem> check_controller(const ShapedController& ctrl, const CheckOptions& opts) {
  const auto& sys = ctrl.sys();
  const auto& table = ctrl.mass();
  std::vector<CheckItem> items;

  double ke_nodes = 0.0, lam = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto jet = table.node(k);
    ke_nodes = std::max(ke_nodes, max_abs(ke_residual(sys, jet)));
    lam = std::min(lam, lambda_min(sys, jet.value));
  }
  items.push_back(item("ke_residual_nodes", ke_nodes, opts.ke_tol));

  double ke_interp = 0.0;
  for (int k = 0; k < opts.interp_points; ++k) {
    const double x = table.lo() + (table.hi() - table.lo()) * (k + 0.5) / opts.interp_points;
    ke_interp = std::max(ke_interp, max_abs(ke_residual(sys, table.at(x))));
  }
  items.push_back(item("ke_residual_interpolated", ke_interp, opts.ke_interp_tol));

  double pe_nodes = 0.0;
  for (double x : ctrl.potential().vm.grid()) {
    if (!ctrl.contains(configuration_at(sys, x))) continue;
    for (const auto& q : pe_samples(ctrl, x)) pe_nodes = std::max(pe_nodes, pe_residual_at(ctrl, q));
  }
  items.push_back(item("pe_residual_nodes", pe_nodes, opts.pe_tol));

  items.push_back({"lambda_min_positive", lam, 0.0, lam > 0.0});
  if (table.free_function().kind == "target_Md") {
    double dev = 0.0;
    for (std::size_t k = 0; k < table.size(); ++k) {
      const auto jet = table.node(k);
      const Mat md_inv = sys.inv_mass(configuration_at(sys, jet.value.q_i)) + jet.full();
      dev = std::max(dev, max_abs(Mat(md_inv - table.free_function().parameter)));
    }
    items.push_back(item("md_target_deviation", dev, 1e-4));
  }

  double j_skew = 0.0, j2_skew = 0.0, dual = 0.0, field = 0.0;
  for (const auto& s : random_states(ctrl, opts.random_states, opts.seed)) {
    const auto t = control_terms(ctrl, s.q, s.p);
    const Mat j = assemble_J(sys, t);
    const Mat j2 = assemble_J2(t);
    j_skew = std::max(j_skew, max_abs(Mat(j + j.transpose())));
    j2_skew = std::max(j2_skew, max_abs(Mat(j2 + j2.transpose())));
    const Vec v = damping(ctrl, s.q, s.p);
    const Vec u = control_law(ctrl, s.q, s.p, v);
    const Vec u2 = control_law_dual(ctrl, s.q, s.p, v);
    dual = std::max(dual, max_abs(Vec(u - u2)) / (1.0 + max_abs(u)));
    const auto plant = open_loop_rhs(sys, s, u);
    const auto red = reduced_dynamics(ctrl, s.q, s.p, v);
    Vec a(2 * sys.n()), b(2 * sys.n());
    a << plant.qdot, plant.pdot;
    b << red.qdot, red.pdot;
    field = std::max(field, max_abs(Vec(a - b)) / (1.0 + max_abs(a)));
  }
  items.push_back(item("J_skew", j_skew, opts.skew_tol));
  items.push_back(item("J2_skew", j2_skew, opts.skew_tol));
  items.push_back(item("dual_path_control", dual, opts.dual_tol));
  items.push_back(item("reduced_vector_field", field, opts.field_tol));
  return items;
}

void export_added_mass(std::ostream& os, const ShapedController& ctrl) {
  const auto& table = ctrl.mass();
  const auto& sys = ctrl.sys();
  std::vector<std::string> cols;
  for (const auto& c : added_mass_columns(table)) {
    if (c.rfind("dm_a", 0) == 0 || c == "s1" || c == "s2" || c == "s3") continue;
    cols.push_back(c);
  }
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) line += (i ? "," : "") + cols[i];
  os << line << '\n';
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto jet = table.node(k);
    line = g17(jet.value.q_i);
    for (Eigen::Index r = 0; r < jet.value.m_a11.rows(); ++r) {
      for (Eigen::Index c = 0; c < jet.value.m_a11.cols(); ++c) line += "," + g17(jet.value.m_a11(r, c));
    }
    const auto& ch = table.channels().values();
    for (Eigen::Index c = 0; c < ch.cols(); ++c) line += "," + g17(ch(static_cast<Eigen::Index>(k), c));
    line += "," + g17(lambda_min(sys, jet.value));
    os << line << '\n';
  }
}

void export_potential(std::ostream& os, const ShapedController& ctrl) {
  const auto& pot = ctrl.potential();
  os << (pot.ansatz == Ansatz::Single ? "q_i,V_m,Gamma_integral\n" : "q_i,f1,f2,Gamma_integral\n");
  const auto& vm = pot.vm;
  for (std::size_t k = 0; k < vm.size(); ++k) {
    const double x = vm.grid()[k];
    if (!pot.gamma.integral.contains(x)) continue;
    std::string line = g17(x);
    for (Eigen::Index c = 0; c < vm.channels(); ++c) line += "," + g17(vm.values()(static_cast<Eigen::Index>(k), c));
    line += "," + g17(pot.gamma.integral.eval(x).first(0));
    os << line << '\n';
  }
}

void export_vd_grid(std::ostream& os, const ShapedController& ctrl, double half, int points) {
  const int n = ctrl.sys().n();
  if (n != 2) throw DimensionError("export_vd_grid: needs a two-coordinate plant");
  const int coord = ctrl.mass().coord();
  const double v0 = eval_Vd(ctrl.potential(), Vec::Zero(n)).first;
  os << "q1,q2,V_d,log10_V_d_shifted\n";
  const double lo_i = std::max(-half, ctrl.lo()), hi_i = std::min(half, ctrl.hi());
  for (int a = 0; a < points; ++a) {
    for (int b = 0; b < points; ++b) {
      Vec q(2);
      const double sa = points == 1 ? 0.5 : static_cast<double>(a) / (points - 1);
      const double sb = points == 1 ? 0.5 : static_cast<double>(b) / (points - 1);
      q(0) = coord == 0 ? lo_i + (hi_i - lo_i) * sa : -half + 2.0 * half * sa;
      q(1) = coord == 1 ? lo_i + (hi_i - lo_i) * sb : -half + 2.0 * half * sb;
      const double vd = eval_Vd(ctrl.potential(), q).first;
      os << g17(q(0)) << ',' << g17(q(1)) << ',' << g17(vd) << ',' << g17(std::log10(std::max(vd - v0, 0.0) + 1e-12))
         << '\n';
    }
  }
}

Trajectory read_trajectory_csv(const fs::path& file) {
  const auto csv = read_csv(file);
  Trajectory tr;
  for (const auto& h : csv.header) {
    if (h.size() > 1 && h[0] == 'q' && std::isdigit(static_cast<unsigned char>(h[1]))) ++tr.n;
    if (h.size() > 1 && h[0] == 'u' && std::isdigit(static_cast<unsigned char>(h[1]))) ++tr.m;
  }
  tr.interconnected = std::find(csv.header.begin(), csv.header.end(), "drift") != csv.header.end();
  const auto block = [&](const std::vector<double>& row, const std::string& prefix, int size) {
    Vec v(size);
    for (int i = 0; i < size; ++i) v(i) = row[csv.column(fmt::format("{}{}", prefix, i + 1))];
    return v;
  };
  for (const auto& row : csv.rows) {
    tr.t.push_back(row[csv.column("t")]);
    tr.q.push_back(block(row, "q", tr.n));
    tr.p.push_back(block(row, "p", tr.n));
    tr.u.push_back(block(row, "u", tr.m));
    tr.h_d.push_back(row[csv.column("H_d")]);
    if (tr.interconnected) {
      tr.q_a1.push_back(block(row, "qa1_", tr.n));
      tr.q_a2.push_back(block(row, "qa2_", tr.n));
      tr.p_a.push_back(block(row, "pa_", tr.n));
      tr.drift.push_back(row[csv.column("drift")]);
    }
  }
  return tr;
}

int run(const Command& cmd, std::ostream& os, std::ostream& err) {
  try {
    if (cmd.name == "synth") return cmd_synth(cmd, os);
    if (cmd.name == "check") return cmd_check(cmd, os);
    if (cmd.name == "simulate") return cmd_simulate(cmd, os);
    if (cmd.name == "export") return cmd_export(cmd, os);
    throw ConfigError(fmt::format("unknown command '{}'", cmd.name));
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const PackageError& e) {
    fmt::print(err, "package error: {}\n", e.what());
    return kPackageError;
  } catch (const DomainBoundaryError& e) {
    fmt::print(err, "domain error: {}\n", e.what());
    return kDomainExit;
  } catch (const OutOfDomainError& e) {
    fmt::print(err, "domain error: {}\n", e.what());
    return kDomainExit;
  } catch (const SingularMatrixError& e) {
    fmt::print(err, "domain error: {}\n", e.what());
    return kDomainExit;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kInternalError;
  }
}

}  // namespace phshape::cli
