#include "phshape/systems.hpp"

#include <fmt/format.h>

#include <cmath>

#include "phshape/errors.hpp"

namespace phshape::systems {
namespace {

Params merge(const char* system, const Params& defaults, const Params& given) {
  Params out = defaults;
  for (const auto& [key, value] : given) {
    if (!defaults.contains(key)) {
      throw ConfigError(fmt::format("system '{}': unknown parameter '{}'", system, key));
    }
    if (!std::isfinite(value)) {
      throw ConfigError(fmt::format("system '{}': parameter '{}' is not finite", system, key));
    }
    out[key] = value;
  }
  return out;
}

}  // namespace

MechanicalSystem cart_pole(const Params& params) {
  const Params p = merge("cart-pole", {{"m_c", 1.0}, {"m_p", 1.0}, {"l", 1.0}, {"g", 9.8}}, params);
  const double mc = p.at("m_c"), mp = p.at("m_p"), l = p.at("l"), g = p.at("g");

  MechanicalSystem::Definition def;
  def.name = "cart-pole";
  def.n = 2;
  def.m = 1;
  def.params = p;
  def.mass_coord = 1;
  def.mass = [=](const Vec& q) {
    const double c = std::cos(q(1));
    Mat m(2, 2);
    m << mc + mp, mp * l * c, mp * l * c, mp * l * l;
    return m;
  };
  def.mass_jacobian = [=](const Vec& q) {
    const double s = std::sin(q(1));
    Mat d(2, 2);
    d << 0.0, -mp * l * s, -mp * l * s, 0.0;
    return std::vector<Mat>{Mat::Zero(2, 2), d};
  };
  def.potential = [=](const Vec& q) { return mp * g * l * std::cos(q(1)); };
  def.potential_grad = [=](const Vec& q) {
    Vec grad(2);
    grad << 0.0, -mp * g * l * std::sin(q(1));
    return grad;
  };
  return MechanicalSystem(std::move(def));
}

MechanicalSystem acrobot(const Params& params) {
  const Params p = merge("acrobot",
                         {{"c1", 2.3333}, {"c2", 5.3333}, {"c3", 2.0}, {"c4", 3.0}, {"c5", 2.0}, {"g", 9.8}},
                         params);
  const double c1 = p.at("c1"), c2 = p.at("c2"), c3 = p.at("c3"), c4 = p.at("c4"), c5 = p.at("c5"),
               g = p.at("g");

  MechanicalSystem::Definition def;
  def.name = "acrobot";
  def.n = 2;
  def.m = 1;
  def.params = p;
  def.mass_coord = 0;
  def.mass = [=](const Vec& q) {
    const double c = std::cos(q(0));
    Mat m(2, 2);
    m << c2, c2 + c3 * c, c2 + c3 * c, c1 + c2 + 2.0 * c3 * c;
    return m;
  };
  def.mass_jacobian = [=](const Vec& q) {
    const double s = std::sin(q(0));
    Mat d(2, 2);
    d << 0.0, -c3 * s, -c3 * s, -2.0 * c3 * s;
    return std::vector<Mat>{d, Mat::Zero(2, 2)};
  };
  def.potential = [=](const Vec& q) { return c4 * g * std::cos(q(1)) + c5 * g * std::cos(q(0) + q(1)); };
  def.potential_grad = [=](const Vec& q) {
    const double s12 = std::sin(q(0) + q(1));
    Vec grad(2);
    grad << -c5 * g * s12, -c4 * g * std::sin(q(1)) - c5 * g * s12;
    return grad;
  };
  return MechanicalSystem(std::move(def));
}

std::vector<std::string> registered() { return {"cart-pole", "acrobot"}; }

MechanicalSystem make_system(const std::string& name, const Params& params) {
  if (name == "cart-pole") return cart_pole(params);
  if (name == "acrobot") return acrobot(params);
  throw ConfigError(fmt::format("unknown system '{}' (known: cart-pole, acrobot)", name));
}

}  // namespace phshape::systems
