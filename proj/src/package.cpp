#include "phshape/package.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "phshape/errors.hpp"
#include "phshape/log.hpp"

namespace phshape {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kFormat = "ph-shape-controller";
constexpr int kVersion = 1;

json to_json(const Mat& a) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Mat mat_from(const json& j, const char* what) {
  if (!j.is_array()) throw PackageError(fmt::format("package.json: {} is not a matrix", what));
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Mat out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw PackageError(fmt::format("package.json: {} is ragged", what));
    }
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return out;
}

Vec vec_from(const json& j, const char* what) {
  if (!j.is_array()) throw PackageError(fmt::format("package.json: {} is not a vector", what));
  Vec out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) out(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return out;
}

const char* to_string(EdgeKind e) { return e == EdgeKind::Boundary ? "boundary" : "range-end"; }

EdgeKind parse_edge(const std::string& s) {
  if (s == "boundary") return EdgeKind::Boundary;
  if (s == "range-end") return EdgeKind::RangeEnd;
  throw PackageError(fmt::format("package.json: unknown edge kind '{}'", s));
}

std::string block_name(const char* block, Eigen::Index r, Eigen::Index c, bool scalar) {
  return scalar ? std::string(block) : fmt::format("{}_{}_{}", block, r + 1, c + 1);
}

// Channel names in pack_unknowns order.
std::vector<std::string> channel_names(int n, int m) {
  std::vector<std::string> out;
  const int u = n - m;
  for (Eigen::Index r = 0; r < u; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) out.push_back(block_name("m_a21", r, c, u == 1 && m == 1));
  }
  for (Eigen::Index r = 0; r < u; ++r) {
    for (Eigen::Index c = r; c < u; ++c) out.push_back(block_name("m_a22", r, c, u == 1));
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw PackageError(fmt::format("cannot write '{}'", file.string()));
  return out;
}

void write_table(const fs::path& file, const HermiteTable& t, const std::vector<std::string>& names) {
  auto out = open_out(file);
  std::string line = "q_i";
  for (const auto& nm : names) line += "," + nm;
  for (const auto& nm : names) line += ",d" + nm;
  out << line << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    line = fmt::format("{:.17g}", t.grid()[k]);
    for (Eigen::Index c = 0; c < t.channels(); ++c) line += fmt::format(",{:.17g}", t.values()(static_cast<Eigen::Index>(k), c));
    for (Eigen::Index c = 0; c < t.channels(); ++c) line += fmt::format(",{:.17g}", t.derivs()(static_cast<Eigen::Index>(k), c));
    out << line << '\n';
  }
}

HermiteTable read_table(const fs::path& file, const std::vector<std::string>& names) {
  const auto csv = read_csv(file);
  const auto rows = static_cast<Eigen::Index>(csv.rows.size());
  if (rows < 2) throw PackageError(fmt::format("{}: needs at least two nodes", file.string()));
  const auto ch = static_cast<Eigen::Index>(names.size());
  std::vector<double> grid(csv.rows.size());
  Mat values(rows, ch), derivs(rows, ch);
  std::size_t qcol = 0;
  std::vector<std::size_t> vcol, dcol;
  try {
    qcol = csv.column("q_i");
    for (const auto& nm : names) {
      vcol.push_back(csv.column(nm));
      dcol.push_back(csv.column("d" + nm));
    }
  } catch (const PackageError& e) {
    throw PackageError(fmt::format("{}: {}", file.string(), e.what()));
  }
  for (Eigen::Index k = 0; k < rows; ++k) {
    const auto& row = csv.rows[static_cast<std::size_t>(k)];
    grid[static_cast<std::size_t>(k)] = row[qcol];
    for (Eigen::Index c = 0; c < ch; ++c) {
      values(k, c) = row[vcol[static_cast<std::size_t>(c)]];
      derivs(k, c) = row[dcol[static_cast<std::size_t>(c)]];
    }
  }
  try {
    return HermiteTable(std::move(grid), std::move(values), std::move(derivs));
  } catch (const Error& e) {
    throw PackageError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

std::vector<std::string> vm_names(Ansatz a) {
  return a == Ansatz::Single ? std::vector<std::string>{"V_m"} : std::vector<std::string>{"f1", "f2"};
}

void write_added_mass(const fs::path& file, const MechanicalSystem& sys, const AddedMassTable& table) {
  auto out = open_out(file);
  const auto cols = added_mass_columns(table);
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) line += (i ? "," : "") + cols[i];
  out << line << '\n';
  const bool scalar = table.n() == 2 && table.m() == 1;
  const auto& ch = table.channels();
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto jet = table.node(k);
    const auto row = static_cast<Eigen::Index>(k);
    line = fmt::format("{:.17g}", ch.grid()[k]);
    for (Eigen::Index r = 0; r < jet.value.m_a11.rows(); ++r) {
      for (Eigen::Index c = 0; c < jet.value.m_a11.cols(); ++c) line += fmt::format(",{:.17g}", jet.value.m_a11(r, c));
    }
    for (Eigen::Index c = 0; c < ch.channels(); ++c) line += fmt::format(",{:.17g}", ch.values()(row, c));
    for (Eigen::Index c = 0; c < ch.channels(); ++c) line += fmt::format(",{:.17g}", ch.derivs()(row, c));
    const Vec q = configuration_at(sys, jet.value.q_i);
    if (scalar) {
      const auto s = schur_terms(sys, jet.value, q);
      line += fmt::format(",{:.17g},{:.17g},{:.17g}", s.s1(0, 0), s.s2(0, 0), s.s3(0, 0));
    }
    line += fmt::format(",{:.17g}", lambda_min(sys, jet.value));
    out << line << '\n';
  }
}

json options_json(const KeSynthesisOptions& o) {
  return {{"rtol", o.rtol},
          {"atol", o.atol},
          {"grid_step", o.grid_step},
          {"h_min", o.h_min},
          {"refine_tol", o.refine_tol}};
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw PackageError(fmt::format("missing column '{}'", name));
}

CsvTable read_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw PackageError(fmt::format("cannot read '{}'", file.string()));
  CsvTable csv;
  std::string line;
  if (!std::getline(in, line)) throw PackageError(fmt::format("{}: empty file", file.string()));
  csv.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != csv.header.size()) {
      throw PackageError(fmt::format("{}:{}: expected {} fields, got {}", file.string(), lineno, csv.header.size(),
                                     cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const char* b = cells[i].data();
      const char* e = b + cells[i].size();
      const auto [ptr, ec] = std::from_chars(b, e, row[i]);
      if (ec != std::errc() || ptr != e) {
        throw PackageError(fmt::format("{}:{}: '{}' is not a number", file.string(), lineno, cells[i]));
      }
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::vector<std::string> added_mass_columns(const AddedMassTable& table) {
  const int n = table.n(), m = table.m();
  std::vector<std::string> out{"q_i"};
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) out.push_back(block_name("m_a11", r, c, m == 1));
  }
  const auto names = channel_names(n, m);
  out.insert(out.end(), names.begin(), names.end());
  for (const auto& nm : names) out.push_back("d" + nm);
  if (n == 2 && m == 1) {
    out.insert(out.end(), {"s1", "s2", "s3"});
  }
  out.emplace_back("lambda_min");
  return out;
}

void save_package(const fs::path& dir, const ControllerPackage& pkg) {
  if (!pkg.controller) throw PackageError("save_package: no controller");
  const auto& ctrl = *pkg.controller;
  const auto& table = ctrl.mass();
  const auto& pot = ctrl.potential();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PackageError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  json meta;
  meta["format"] = kFormat;
  meta["version"] = kVersion;
  meta["system"] = {{"name", pkg.system}, {"params", pkg.params}};
  meta["n"] = table.n();
  meta["m"] = table.m();
  meta["coord"] = table.coord();
  meta["free_function"] = {{"kind", table.free_function().kind}, {"parameter", to_json(table.free_function().parameter)}};
  meta["added_mass"] = {{"init",
                         {{"q_i", table.init.q_i},
                          {"m_a11", to_json(table.init.m_a11)},
                          {"m_a21", to_json(table.init.m_a21)},
                          {"m_a22", to_json(table.init.m_a22)}}},
                        {"requested_range", {table.requested_range.first, table.requested_range.second}},
                        {"options", options_json(table.options)},
                        {"lo_edge", to_string(table.lo_edge)},
                        {"hi_edge", to_string(table.hi_edge)},
                        {"lo_reason", table.lo_reason},
                        {"hi_reason", table.hi_reason},
                        {"nodes", table.size()}};
  meta["potential"] = {{"ansatz", to_string(pot.ansatz)},
                       {"coord", pot.coord},
                       {"other", pot.other},
                       {"init", to_json(pot.init)},
                       {"kappa", pot.kappa},
                       {"gamma", to_string(pot.gamma.choice)},
                       {"gamma_k", pot.gamma.k},
                       {"refine_tol", pot.options.refine_tol},
                       {"lo_reason", pot.lo_reason},
                       {"hi_reason", pot.hi_reason}};
  meta["K_d"] = to_json(ctrl.kd());
  meta["domain"] = {ctrl.lo(), ctrl.hi()};

  open_out(dir / "package.json") << meta.dump(2) << '\n';
  write_added_mass(dir / "added_mass.csv", ctrl.sys(), table);
  write_table(dir / "potential.csv", pot.vm, vm_names(pot.ansatz));
  write_table(dir / "gamma.csv", pot.gamma.integral, {"I"});
  log::info("wrote controller package to {}", dir.string());
}

ControllerPackage load_package(const fs::path& dir) {
  std::ifstream in(dir / "package.json");
  if (!in) throw PackageError(fmt::format("cannot read '{}'", (dir / "package.json").string()));
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::parse_error& e) {
    throw PackageError(fmt::format("package.json is not valid JSON: {}", e.what()));
  }

  try {
    if (meta.value("format", "") != kFormat || meta.value("version", 0) != kVersion) {
      throw PackageError("package.json: not a version 1 controller package");
    }
    ControllerPackage pkg;
    pkg.system = meta.at("system").at("name").get<std::string>();
    pkg.params = meta.at("system").at("params").get<systems::Params>();
    MechanicalSystem sys = [&] {
      try {
        return systems::make_system(pkg.system, pkg.params);
      } catch (const ConfigError& e) {
        throw PackageError(fmt::format("package.json: {}", e.what()));
      }
    }();
    const int n = meta.at("n").get<int>(), m = meta.at("m").get<int>(), coord = meta.at("coord").get<int>();
    if (n != sys.n() || m != sys.m() || !sys.mass_coord() || coord != *sys.mass_coord()) {
      throw PackageError("package.json: dimensions do not match the plant");
    }

    const auto& ff = meta.at("free_function");
    const auto kind = ff.at("kind").get<std::string>();
    const Mat param = mat_from(ff.at("parameter"), "free_function.parameter");
    FreeMassFunction free;
    if (kind == "constant") {
      if (param.rows() != m || param.cols() != m) throw PackageError("package.json: free function has the wrong size");
      free = constant_free_function(param);
    } else if (kind == "target_Md") {
      if (param.rows() != n || param.cols() != n) throw PackageError("package.json: free function has the wrong size");
      free = target_md_free_function(sys, param);
    } else {
      throw PackageError(fmt::format("package.json: unknown free function '{}'", kind));
    }

    AddedMassTable table(n, m, coord, std::move(free), read_table(dir / "added_mass.csv", channel_names(n, m)));
    const auto& am = meta.at("added_mass");
    const auto& init = am.at("init");
    table.init.q_i = init.at("q_i").get<double>();
    table.init.m_a11 = mat_from(init.at("m_a11"), "init.m_a11");
    table.init.m_a21 = mat_from(init.at("m_a21"), "init.m_a21");
    table.init.m_a22 = mat_from(init.at("m_a22"), "init.m_a22");
    table.requested_range = {am.at("requested_range").at(0).get<double>(), am.at("requested_range").at(1).get<double>()};
    const auto& o = am.at("options");
    table.options.rtol = o.at("rtol").get<double>();
    table.options.atol = o.at("atol").get<double>();
    table.options.grid_step = o.at("grid_step").get<double>();
    table.options.h_min = o.at("h_min").get<double>();
    table.options.refine_tol = o.at("refine_tol").get<double>();
    table.lo_edge = parse_edge(am.at("lo_edge").get<std::string>());
    table.hi_edge = parse_edge(am.at("hi_edge").get<std::string>());
    table.lo_reason = am.at("lo_reason").get<std::string>();
    table.hi_reason = am.at("hi_reason").get<std::string>();

    const auto& pm = meta.at("potential");
    ShapedPotential pot;
    try {
      pot.ansatz = parse_ansatz(pm.at("ansatz").get<std::string>());
      pot.gamma.choice = parse_gamma_choice(pm.at("gamma").get<std::string>());
    } catch (const ConfigError& e) {
      throw PackageError(fmt::format("package.json: {}", e.what()));
    }
    pot.n = n;
    pot.coord = pm.at("coord").get<int>();
    pot.other = pm.at("other").get<int>();
    pot.init = vec_from(pm.at("init"), "potential.init");
    pot.kappa = pm.at("kappa").get<double>();
    pot.options.refine_tol = pm.at("refine_tol").get<double>();
    pot.lo_reason = pm.at("lo_reason").get<std::string>();
    pot.hi_reason = pm.at("hi_reason").get<std::string>();
    pot.vm = read_table(dir / "potential.csv", vm_names(pot.ansatz));
    pot.gamma.k = pm.at("gamma_k").get<int>();
    pot.gamma.coord = coord;
    pot.gamma.integral = read_table(dir / "gamma.csv", {"I"});
    if (pot.coord != coord || pot.gamma.k < 0 || pot.gamma.k >= n || pot.other < 0 || pot.other >= n) {
      throw PackageError("package.json: potential coordinates out of range");
    }

    const Mat kd = mat_from(meta.at("K_d"), "K_d");
    try {
      pkg.controller = std::make_shared<const ShapedController>(std::move(sys), std::move(table), std::move(pot), kd);
    } catch (const PackageError&) {
      throw;
    } catch (const Error& e) {
      throw PackageError(fmt::format("package is inconsistent: {}", e.what()));
    }
    return pkg;
  } catch (const json::exception& e) {
    throw PackageError(fmt::format("package.json: {}", e.what()));
  }
}

}  // namespace phshape
