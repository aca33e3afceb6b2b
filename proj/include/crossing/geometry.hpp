#pragma once

namespace crossing {

/// Layout of the crossing. The origin is the conflict point; the vehicle
/// drives along x toward it, the pedestrian walks along y through it.
struct Geometry {
  double d_NZ = 4.0;             // near-zone radius [m]
  double d_CA = 2.0;             // collision-area radius [m]
  double L_corridor = 4.0;       // vehicle body length along its path [m]
  double crossing_length = 8.0;  // curb to curb [m]

  void validate() const;
};

/// Euclidean distance from the pedestrian to the vehicle footprint, modelled
/// as the segment between the vehicle front and a point L_corridor behind it.
double separation(double d_veh, double d_ped, double L_corridor);

}  // namespace crossing
