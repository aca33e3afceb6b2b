#include "crossing/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "crossing/decision.hpp"

namespace crossing {

void Geometry::validate() const {
  if (!std::isfinite(d_NZ) || !std::isfinite(d_CA) || !std::isfinite(L_corridor) ||
      !std::isfinite(crossing_length)) {
    throw ConfigError("geometry values must be finite");
  }
  if (!(d_CA > 0.0) || !(d_CA < d_NZ)) throw ConfigError("geometry needs 0 < d_CA < d_NZ");
  if (!(L_corridor > 0.0)) throw ConfigError("L_corridor must be positive");
  // A finished crossing must also have left the collision area.
  if (!(crossing_length / 2.0 > d_CA)) {
    throw ConfigError("crossing_length / 2 must exceed d_CA");
  }
}

double separation(double d_veh, double d_ped, double L_corridor) {
  // Vehicle front sits at x = -d_veh, its rear at x = -d_veh - L_corridor.
  const double front = -d_veh;
  const double rear = front - L_corridor;
  const double nearest_x = std::clamp(0.0, rear, front);
  return std::hypot(nearest_x, d_ped);
}

}  // namespace crossing
