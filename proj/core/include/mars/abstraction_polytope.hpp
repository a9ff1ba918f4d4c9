#pragma once

#include <array>

#include <Eigen/Dense>

#include "mars/abstraction_equal.hpp"
#include "mars/geometry.hpp"

namespace mars {

/// Per-unit lumped wrench data: each unit acts as one thrust source at its centre.
struct WrenchVertexSet {
  Eigen::MatrixXd g_mars;    // 4 x n, yaw row zero
  Eigen::MatrixXd vertices;  // n x 2^n, bit i of column k selects unit i's max total
  double f_sum_min = 0.0;
  double f_sum_max = 0.0;
};

/// How the virtual wrench vertices are tied to the physical force set.
enum class ContainmentModel {
  /// Each virtual vertex must be produced by some rotor-force vector inside the
  /// rotor bounds, which is the exact feasible wrench polytope.
  kRotorBox,
  /// Each virtual vertex is a convex combination of the lumped unit vertices.
  kReducedUnitVertex,
};

struct UnequalArmAbstraction {
  ContainmentModel model = ContainmentModel::kRotorBox;
  Vec3 centroid = Vec3::Zero();
  VirtualRotors virtual_rotors{};
  double c_vz = 0.0;
  Mat4 effectiveness = Mat4::Zero();
  double mass = 0.0;
  Mat3 inertia = Mat3::Zero();
  double f_sum_min = 0.0;
  double f_sum_max = 0.0;
  /// 2^n x 16 column-stochastic weights (reduced model, or the explicit hull form).
  Eigen::MatrixXd containment_weights;
  /// 4n x 16 rotor forces realising each virtual vertex (rotor-box model).
  Eigen::MatrixXd vertex_realizations;
  /// Maximised objective: (f_sum_max / 4) times the sum of all virtual arm lengths.
  double objective = 0.0;
};

struct ApproximationReport {
  std::array<double, 4> per_axis{};
  /// False where the physical grouped torque is zero; that axis is left out of the mean.
  std::array<bool, 4> defined{true, true, true, true};
  double mean_abs = 0.0;
};

/// 4 x 4n rotor effectiveness about the centroid: rows [1; -dy; dx; spin * c_z].
Eigen::MatrixXd mars_effectiveness(const MarsConfig& config);

/// Throws TooManyUnits when n > 12.
WrenchVertexSet reduced_vertex_set(const MarsConfig& config);

/// 4 x 16 virtual rotor force vertices: rotor j sits at f_max/4 when bit j of the
/// column index is set, else at f_min/4.
Eigen::Matrix<double, 4, 16> virtual_vertex_matrix(double f_sum_min, double f_sum_max);

/// All 2^(4n) rotor-force vertices mapped to (thrust, roll, pitch). Only for n <= 4.
Eigen::Matrix3Xd physical_wrench_vertices(const MarsConfig& config);

UnequalArmAbstraction unequal_arm_abstraction(const MarsConfig& config,
                                              ContainmentModel model = ContainmentModel::kRotorBox);

/// Containment against an explicit list of physical (thrust, roll, pitch) vertices,
/// with one convex-combination weight per vertex.
UnequalArmAbstraction hull_vertex_abstraction(const MarsConfig& config,
                                              const Eigen::Matrix3Xd& wrench_vertices);

/// Relative grouped-torque mismatch at zero yaw with every rotor at its maximum.
ApproximationReport approximation_error(const UnequalArmAbstraction& abstraction,
                                        const MarsConfig& config);

}  // namespace mars
