#pragma once

#include <array>

#include <Eigen/Dense>

#include "mars/geometry.hpp"

namespace mars {

/// Relative weight of roll and pitch authority when choosing the virtual yaw.
struct TorqueBalanceWeights {
  double c_x = 1.0;
  double c_y = 1.0;
};

/// Sums of the positive and negative per-rotor roll/pitch torques. The `*_neg`
/// members are <= 0.
struct GroupedTorques {
  double x_pos = 0.0;
  double x_neg = 0.0;
  double y_pos = 0.0;
  double y_neg = 0.0;
};

/// Virtual rotor (x, y) positions relative to the centroid, in the virtual body
/// frame. Order: 1 (+x,+y), 2 (-x,-y), 3 (+x,-y), 4 (-x,+y).
using VirtualRotors = std::array<Vec2, 4>;

struct EqualArmAbstraction {
  Vec3 centroid = Vec3::Zero();
  double yaw_opt = 0.0;  // rad
  VirtualRotors virtual_rotors{};
  double c_vz = 0.0;
  Mat4 effectiveness = Mat4::Zero();
  double mass = 0.0;
  Mat3 inertia = Mat3::Zero();  // about the centroid, virtual frame
};

/// Rotor lever arms (x, y) about the centroid after rotating the structure by theta.
/// Columns are unit-major rotors.
Eigen::Matrix2Xd rotated_lever_arms(const MarsConfig& config, double theta);

/// Grouped torques at yaw theta. `forces` (unit-major, 4n) defaults to all ones.
GroupedTorques grouped_torques(const MarsConfig& config, double theta,
                               const Eigen::VectorXd* forces = nullptr);

/// Grouped torques of four virtual rotors, each producing `force`.
GroupedTorques grouped_torques(const VirtualRotors& rotors, double force);

double yaw_objective(const MarsConfig& config, double theta, const TorqueBalanceWeights& weights);

/// Maximiser of yaw_objective in [0, pi): 3600-point grid, then golden-section
/// refinement. Among grid points within 1e-9 of the best, the smallest angle wins.
double optimal_yaw(const MarsConfig& config, const TorqueBalanceWeights& weights);

/// Virtual rotor layout reproducing the grouped torques at theta with unit forces.
/// Throws DegenerateConfig when a grouped sum vanishes.
VirtualRotors virtual_rotor_positions(const MarsConfig& config, double theta);

/// Thrust-weighted mean c_z. With no forces given every rotor counts as 1 N.
double yaw_torque_coefficient(const MarsConfig& config);
double yaw_torque_coefficient(const MarsConfig& config, const Eigen::VectorXd& forces);

/// 4x4 effectiveness matrix of a quadrotor with the given rotors:
/// rows [1; -y; x; spin * c_vz] with spin pattern (-,-,+,+).
Mat4 effectiveness_from_rotors(const VirtualRotors& rotors, double c_vz);

EqualArmAbstraction equal_arm_abstraction(const MarsConfig& config,
                                          const TorqueBalanceWeights& weights = {});

}  // namespace mars
