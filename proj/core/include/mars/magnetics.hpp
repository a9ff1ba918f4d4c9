#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mars/geometry.hpp"

namespace mars {

inline constexpr double kMu0Over4Pi = 1e-7;  // T m / A

/// Point dipole at `position` with an axis-aligned moment.
struct Magnet {
  Vec3 position = Vec3::Zero();
  Vec3 moment = Vec3::UnitZ();  // A m^2
};

/// Orientation index o in 0..5 maps to +x, -x, +y, -y, +z, -z.
Vec3 orientation_axis(int o);
int opposite_orientation(int o);

/// Each layer holds two contiguous half-rings; the first half uses the layer's
/// orientation and the second half the opposite one.
struct MagnetArrangement {
  std::vector<Magnet> magnets;
  int layers = 0;
  int magnets_per_layer = 0;
  std::vector<int> orientation;  // one entry per layer, group 0
};

struct LatticeSpec {
  int layers = 7;
  int magnets_per_layer = 14;
  double radius = 0.02;   // m
  double pitch = 0.006;   // m, layer spacing
  double magnitude = 1.0;  // A m^2
};

/// B = mu0/4pi [3 r (d.r)/|r|^5 - d/|r|^3] with r = point - position.
Vec3 dipole_field(const Vec3& position, const Vec3& moment, const Vec3& point);

/// Mean over observation points of the summed per-magnet field magnitudes.
double field_objective(const std::vector<Magnet>& magnets, const std::vector<Vec3>& points);
double field_objective(const MagnetArrangement& arrangement, const std::vector<Vec3>& points);

/// Mean over observation points of the magnitude of the superposed field.
double superposed_field_norm(const std::vector<Magnet>& magnets, const std::vector<Vec3>& points);

/// Rings of equally spaced positions, layer-major, layer l at z = l * pitch.
std::vector<Vec3> docking_lattice(int layers, int magnets_per_layer, double radius, double pitch);

/// `samples` points per layer height on a ring 1 mm outside the lattice radius.
std::vector<Vec3> observation_ring(const LatticeSpec& spec, int samples = 32);

MagnetArrangement make_arrangement(const LatticeSpec& spec, int layers, const std::vector<int>& orientation);

/// Every magnet of the first `layers` layers along +z.
std::vector<Magnet> uniform_baseline(const LatticeSpec& spec, int layers);

struct ArrangementSearch {
  MagnetArrangement best;
  std::vector<double> history;  // best objective for L = 1, 2, ...
  bool target_reached = false;
  std::uint64_t evaluations = 0;
};

/// Layer-wise search: grows L until the objective reaches `b_desired` or the lattice
/// is exhausted. Exhaustive branch-and-bound up to 6^7 assignments, seeded
/// hill-climbing with 16 restarts beyond.
ArrangementSearch optimize_arrangement(const LatticeSpec& spec, const std::vector<Vec3>& points, double b_desired,
                                       std::uint64_t seed);

}  // namespace mars
