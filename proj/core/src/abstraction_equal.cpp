#include "mars/abstraction_equal.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mars/errors.hpp"

namespace mars {
namespace {

constexpr int kGridPoints = 3600;
constexpr double kTieTolerance = 1e-9;
constexpr double kRefineTolerance = 1e-10;

void check_weights(const TorqueBalanceWeights& w) {
  if (!(w.c_x >= 0.0) || !(w.c_y >= 0.0) || !(w.c_x + w.c_y > 0.0)) {
    throw std::invalid_argument("torque balance weights must be >= 0 with a positive sum");
  }
}

double wrap_pi(double theta) {
  double t = std::fmod(theta, std::numbers::pi);
  if (t < 0.0) t += std::numbers::pi;
  if (t >= std::numbers::pi) t = 0.0;
  return t;
}

GroupedTorques accumulate(const Eigen::Matrix2Xd& arms, const Eigen::VectorXd* forces) {
  GroupedTorques g;
  for (Eigen::Index k = 0; k < arms.cols(); ++k) {
    const double f = forces != nullptr ? (*forces)[k] : 1.0;
    const double tx = -arms(1, k) * f;
    const double ty = arms(0, k) * f;
    (tx > 0.0 ? g.x_pos : g.x_neg) += tx;
    (ty > 0.0 ? g.y_pos : g.y_neg) += ty;
  }
  return g;
}

}  // namespace

Eigen::Matrix2Xd rotated_lever_arms(const MarsConfig& config, double theta) {
  const Vec3 pv = centroid(config);
  const Eigen::Matrix2d r = Eigen::Rotation2Dd(theta).toRotationMatrix();
  Eigen::Matrix2Xd arms(2, static_cast<Eigen::Index>(config.rotor_count()));
  Eigen::Index k = 0;
  for (const UnitSpec& u : config.units) {
    for (int j = 0; j < 4; ++j) {
      const Vec3 d = rotor_position(u, j) - pv;
      arms.col(k++) = r * d.head<2>();
    }
  }
  return arms;
}

GroupedTorques grouped_torques(const MarsConfig& config, double theta, const Eigen::VectorXd* forces) {
  if (forces != nullptr && forces->size() != static_cast<Eigen::Index>(config.rotor_count())) {
    throw std::invalid_argument("grouped_torques: force vector must have 4n entries");
  }
  return accumulate(rotated_lever_arms(config, theta), forces);
}

GroupedTorques grouped_torques(const VirtualRotors& rotors, double force) {
  Eigen::Matrix2Xd arms(2, 4);
  for (int j = 0; j < 4; ++j) arms.col(j) = rotors[static_cast<std::size_t>(j)];
  const Eigen::VectorXd f = Eigen::VectorXd::Constant(4, force);
  return accumulate(arms, &f);
}

double yaw_objective(const MarsConfig& config, double theta, const TorqueBalanceWeights& weights) {
  check_weights(weights);
  const GroupedTorques g = grouped_torques(config, theta);
  return weights.c_x * (g.x_pos - g.x_neg) + weights.c_y * (g.y_pos - g.y_neg);
}

double optimal_yaw(const MarsConfig& config, const TorqueBalanceWeights& weights) {
  check_weights(weights);
  const double h = std::numbers::pi / kGridPoints;
  std::vector<double> values(kGridPoints);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kGridPoints; ++k) {
    values[static_cast<std::size_t>(k)] = yaw_objective(config, k * h, weights);
    best = std::max(best, values[static_cast<std::size_t>(k)]);
  }
  int pick = 0;
  while (values[static_cast<std::size_t>(pick)] < best - kTieTolerance) ++pick;

  // Golden-section search on the two neighbouring grid cells.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = (pick - 1) * h;
  double b = (pick + 1) * h;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = yaw_objective(config, c, weights);
  double fd = yaw_objective(config, d, weights);
  while (b - a > kRefineTolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = yaw_objective(config, c, weights);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = yaw_objective(config, d, weights);
    }
  }
  const double refined = 0.5 * (a + b);
  const double grid_theta = pick * h;
  const double grid_value = values[static_cast<std::size_t>(pick)];
  if (yaw_objective(config, refined, weights) > grid_value + 1e-13) return wrap_pi(refined);
  return grid_theta;
}

VirtualRotors virtual_rotor_positions(const MarsConfig& config, double theta) {
  const GroupedTorques g = grouped_torques(config, theta);
  const double two_n = 2.0 * static_cast<double>(config.unit_count());
  const double a_minus = g.x_pos / two_n;
  const double a_plus = -g.x_neg / two_n;
  const double b_plus = g.y_pos / two_n;
  const double b_minus = -g.y_neg / two_n;
  const double tiny = 1e-12;
  if (a_minus <= tiny || a_plus <= tiny || b_plus <= tiny || b_minus <= tiny) {
    throw DegenerateConfig("a grouped torque sum is zero; no x-shaped virtual quadrotor exists");
  }
  return {Vec2(b_plus, a_plus), Vec2(-b_minus, -a_minus), Vec2(b_plus, -a_minus), Vec2(-b_minus, a_plus)};
}

double yaw_torque_coefficient(const MarsConfig& config) {
  return yaw_torque_coefficient(config, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(config.rotor_count())));
}

double yaw_torque_coefficient(const MarsConfig& config, const Eigen::VectorXd& forces) {
  if (forces.size() != static_cast<Eigen::Index>(config.rotor_count())) {
    throw std::invalid_argument("yaw_torque_coefficient: force vector must have 4n entries");
  }
  double tau = 0.0;
  Eigen::Index k = 0;
  for (const UnitSpec& u : config.units) {
    for (const RotorSpec& r : u.rotors) tau += std::abs(r.spin_sign * r.c_z) * forces[k++];
  }
  const double total = forces.sum();
  if (!(total > 0.0)) throw std::invalid_argument("yaw_torque_coefficient: total force must be positive");
  return tau / total;
}

Mat4 effectiveness_from_rotors(const VirtualRotors& rotors, double c_vz) {
  Mat4 g;
  for (int j = 0; j < 4; ++j) {
    const Vec2& p = rotors[static_cast<std::size_t>(j)];
    g.col(j) << 1.0, -p.y(), p.x(), expected_spin_sign(j) * c_vz;
  }
  return g;
}

EqualArmAbstraction equal_arm_abstraction(const MarsConfig& config, const TorqueBalanceWeights& weights) {
  EqualArmAbstraction a;
  a.centroid = centroid(config);
  a.yaw_opt = optimal_yaw(config, weights);
  a.virtual_rotors = virtual_rotor_positions(config, a.yaw_opt);
  a.c_vz = yaw_torque_coefficient(config);
  a.effectiveness = effectiveness_from_rotors(a.virtual_rotors, a.c_vz);
  a.mass = total_mass(config);
  const Mat3 r = Eigen::AngleAxisd(a.yaw_opt, Vec3::UnitZ()).toRotationMatrix();
  a.inertia = r * composite_inertia(config, a.centroid) * r.transpose();
  return a;
}

}  // namespace mars
