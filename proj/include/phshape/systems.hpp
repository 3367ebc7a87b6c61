#pragma once

#include <map>
#include <string>
#include <vector>

#include "phshape/mech_core.hpp"

namespace phshape::systems {

using Params = std::map<std::string, double>;

/// Cart-pole: q = (cart position, pole angle from upright).
/// Parameters m_c, m_p, l, g; defaults 1, 1, 1, 9.8.
MechanicalSystem cart_pole(const Params& params = {});

/// Acrobot in the (c1..c5, g) parameterisation with q1 the actuated relative
/// angle and q2 the base link angle. Defaults c1=2.3333, c2=5.3333, c3=2,
/// c4=3, c5=2, g=9.8.
MechanicalSystem acrobot(const Params& params = {});

/// Names accepted by make_system.
std::vector<std::string> registered();

/// Looks up a built-in system by name; unknown names or parameters throw
/// ConfigError.
MechanicalSystem make_system(const std::string& name, const Params& params = {});

}  // namespace phshape::systems
