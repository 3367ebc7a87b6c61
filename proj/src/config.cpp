#include "phshape/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "phshape/errors.hpp"

namespace phshape {
namespace {

using json = nlohmann::json;

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", where, k));
  }
}

const json& required(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw ConfigError(fmt::format("{}: missing key '{}'", where, key));
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", where));
  return v.get<double>();
}

double positive(const json& v, const std::string& where) {
  const double x = number(v, where);
  if (!(x > 0.0)) throw ConfigError(fmt::format("{}: must be positive", where));
  return x;
}

Vec vector(const json& v, const std::string& where, Eigen::Index size) {
  if (v.is_number() && size == 1) return Vec::Constant(1, v.get<double>());
  if (!v.is_array()) throw ConfigError(fmt::format("{}: expected an array", where));
  if (static_cast<Eigen::Index>(v.size()) != size) {
    throw ConfigError(fmt::format("{}: expected {} entries, got {}", where, size, v.size()));
  }
  Vec out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = number(v[static_cast<std::size_t>(i)], where);
  return out;
}

// A scalar is accepted for 1 x 1 blocks.
Mat matrix(const json& v, const std::string& where, Eigen::Index rows, Eigen::Index cols) {
  if (v.is_number() && rows == 1 && cols == 1) return Mat::Constant(1, 1, v.get<double>());
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != rows) {
    throw ConfigError(fmt::format("{}: expected a {}x{} matrix", where, rows, cols));
  }
  Mat out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = vector(v[static_cast<std::size_t>(r)], where, cols).transpose();
  }
  return out;
}

void parse_system(const json& j, RunConfig& cfg) {
  allow_keys(j, "system", {"name", "params"});
  const auto& name = required(j, "system", "name");
  if (!name.is_string()) throw ConfigError("system.name: expected a string");
  cfg.system = name.get<std::string>();
  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (!p.is_object()) throw ConfigError("system.params: expected an object");
    for (const auto& [k, v] : p.items()) cfg.params[k] = number(v, "system.params." + k);
  }
}

void parse_synthesis(const json& j, const MechanicalSystem& sys, RunConfig& cfg) {
  allow_keys(j, "synthesis", {"init", "free_function", "range", "tolerances"});
  const int n = sys.n(), m = sys.m();
  auto& s = cfg.synthesis;

  const auto& init = required(j, "synthesis", "init");
  allow_keys(init, "synthesis.init", {"q_i", "m_a11", "m_a21", "m_a22", "md_inv"});
  s.init.q_i = init.contains("q_i") ? number(init.at("q_i"), "synthesis.init.q_i") : 0.0;
  if (init.contains("md_inv")) {
    if (init.contains("m_a11") || init.contains("m_a21") || init.contains("m_a22")) {
      throw ConfigError("synthesis.init: give either md_inv or the m_a blocks, not both");
    }
    const Mat md_inv = matrix(init.at("md_inv"), "synthesis.init.md_inv", n, n);
    const Mat ma = md_inv - sys.inv_mass(configuration_at(sys, s.init.q_i));
    s.init = AddedMassState::from_full(s.init.q_i, ma, m);
  } else {
    s.init.m_a11 = matrix(required(init, "synthesis.init", "m_a11"), "synthesis.init.m_a11", m, m);
    s.init.m_a21 = matrix(required(init, "synthesis.init", "m_a21"), "synthesis.init.m_a21", n - m, m);
    s.init.m_a22 = matrix(required(init, "synthesis.init", "m_a22"), "synthesis.init.m_a22", n - m, n - m);
  }

  if (j.contains("free_function")) {
    const auto& f = j.at("free_function");
    allow_keys(f, "synthesis.free_function", {"kind", "value", "md_inv"});
    const auto& kind = required(f, "synthesis.free_function", "kind");
    if (!kind.is_string()) throw ConfigError("synthesis.free_function.kind: expected a string");
    s.free.kind = kind.get<std::string>();
    if (s.free.kind == "constant") {
      if (f.contains("md_inv")) throw ConfigError("synthesis.free_function: md_inv needs kind target_Md");
      s.free.value = f.contains("value") ? matrix(f.at("value"), "synthesis.free_function.value", m, m)
                                         : s.init.m_a11;
    } else if (s.free.kind == "target_Md") {
      if (f.contains("value")) throw ConfigError("synthesis.free_function: value needs kind constant");
      s.free.md_inv = matrix(required(f, "synthesis.free_function", "md_inv"), "synthesis.free_function.md_inv", n, n);
    } else {
      throw ConfigError(fmt::format("synthesis.free_function.kind: unknown '{}' (expected constant or target_Md)",
                                    s.free.kind));
    }
  } else {
    s.free.kind = "constant";
    s.free.value = s.init.m_a11;
  }

  if (j.contains("range")) {
    const Vec r = vector(j.at("range"), "synthesis.range", 2);
    if (!(r(0) <= s.init.q_i && s.init.q_i <= r(1))) {
      throw ConfigError("synthesis.range: must be ascending and contain init.q_i");
    }
    s.range = {r(0), r(1)};
  }

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    allow_keys(t, "synthesis.tolerances", {"rtol", "atol", "grid_step", "h_min", "refine_tol"});
    auto& o = s.options;
    if (t.contains("rtol")) o.rtol = positive(t.at("rtol"), "synthesis.tolerances.rtol");
    if (t.contains("atol")) o.atol = positive(t.at("atol"), "synthesis.tolerances.atol");
    if (t.contains("grid_step")) o.grid_step = positive(t.at("grid_step"), "synthesis.tolerances.grid_step");
    if (t.contains("h_min")) o.h_min = positive(t.at("h_min"), "synthesis.tolerances.h_min");
    if (t.contains("refine_tol")) o.refine_tol = positive(t.at("refine_tol"), "synthesis.tolerances.refine_tol");
  }
}

void parse_potential(const json& j, RunConfig& cfg) {
  allow_keys(j, "potential", {"ansatz", "init", "kappa", "gamma", "refine_tol"});
  auto& p = cfg.potential;
  if (j.contains("ansatz")) {
    if (!j.at("ansatz").is_string()) throw ConfigError("potential.ansatz: expected a string");
    p.ansatz = parse_ansatz(j.at("ansatz").get<std::string>());
  }
  const Eigen::Index size = p.ansatz == Ansatz::Single ? 1 : 2;
  p.init = j.contains("init") ? vector(j.at("init"), "potential.init", size) : Vec::Zero(size);
  p.kappa = number(required(j, "potential", "kappa"), "potential.kappa");
  if (p.kappa < 0.0) throw ConfigError("potential.kappa: must be nonnegative");
  if (j.contains("gamma")) {
    if (!j.at("gamma").is_string()) throw ConfigError("potential.gamma: expected a string");
    p.gamma = parse_gamma_choice(j.at("gamma").get<std::string>());
  }
  if (j.contains("refine_tol")) p.options.refine_tol = positive(j.at("refine_tol"), "potential.refine_tol");
}

void parse_damping(const json& j, const MechanicalSystem& sys, RunConfig& cfg) {
  allow_keys(j, "damping", {"K_d"});
  cfg.kd = matrix(required(j, "damping", "K_d"), "damping.K_d", sys.m(), sys.m());
}

void parse_simulation(const json& j, const MechanicalSystem& sys, RunConfig& cfg) {
  allow_keys(j, "simulation", {"q0", "p0", "T", "dt_out", "rtol", "atol"});
  auto& s = cfg.simulation;
  s.init.q = vector(required(j, "simulation", "q0"), "simulation.q0", sys.n());
  s.init.p = j.contains("p0") ? vector(j.at("p0"), "simulation.p0", sys.n()) : Vec::Zero(sys.n());
  if (j.contains("T")) s.t_final = positive(j.at("T"), "simulation.T");
  if (j.contains("dt_out")) s.options.dt_out = positive(j.at("dt_out"), "simulation.dt_out");
  if (j.contains("rtol")) s.options.rtol = positive(j.at("rtol"), "simulation.rtol");
  if (j.contains("atol")) s.options.atol = positive(j.at("atol"), "simulation.atol");
}

}  // namespace

MechanicalSystem RunConfig::make_system() const { return systems::make_system(system, params); }

FreeMassFunction RunConfig::make_free_function(const MechanicalSystem& sys) const {
  if (synthesis.free.kind == "target_Md") return target_md_free_function(sys, synthesis.free.md_inv);
  return constant_free_function(synthesis.free.value);
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  allow_keys(j, "config", {"system", "synthesis", "potential", "damping", "simulation"});
  RunConfig cfg;
  parse_system(required(j, "config", "system"), cfg);
  const auto sys = cfg.make_system();
  if (!sys.mass_coord()) throw ConfigError(fmt::format("system '{}' has no single mass coordinate", sys.name()));
  parse_synthesis(required(j, "config", "synthesis"), sys, cfg);
  parse_potential(required(j, "config", "potential"), cfg);
  parse_damping(required(j, "config", "damping"), sys, cfg);
  parse_simulation(required(j, "config", "simulation"), sys, cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace phshape
