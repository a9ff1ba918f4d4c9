#pragma once

#include <Eigen/Dense>

#include "mars/geometry.hpp"

namespace mars {

using StateVector = Eigen::Matrix<double, 13, 1>;
using StateMatrix = Eigen::Matrix<double, 13, 13>;
using InputMatrix = Eigen::Matrix<double, 13, 4>;

/// Position and velocity are inertial, the angular rate is body-frame. The quaternion
/// is stored scalar-first (w, x, y, z) and rotates body vectors into the inertial frame.
struct RigidState {
  Vec3 p = Vec3::Zero();
  Vec4 q = Vec4(1.0, 0.0, 0.0, 0.0);
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();

  StateVector to_vector() const;
  static RigidState from_vector(const StateVector& x);
};

/// Collective thrust along body z and body torque.
struct WrenchCommand {
  double F = 0.0;
  Vec3 M = Vec3::Zero();

  Vec4 to_vector() const { return Vec4(F, M.x(), M.y(), M.z()); }
  static WrenchCommand from_vector(const Vec4& u) { return {u[0], u.tail<3>()}; }
};

struct BodyParams {
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();
  double gravity = 9.81;
};

/// Hamilton product a * b of scalar-first quaternions.
Vec4 quat_multiply(const Vec4& a, const Vec4& b);
Vec4 quat_conjugate(const Vec4& q);
Mat3 rotation_matrix(const Vec4& q);

/// Time derivative [p', q', v', omega'].
StateVector state_derivative(const RigidState& s, const WrenchCommand& u, const BodyParams& b);

/// Jacobians of state_derivative with respect to the state and to (F, M).
void derivative_jacobians(const StateVector& x, const Vec4& u, const BodyParams& b, StateMatrix& jx,
                          InputMatrix& ju);

/// One classical RK4 step followed by quaternion renormalisation. Requires 0 < dt <= 0.05.
RigidState step(const RigidState& s, const WrenchCommand& u, const BodyParams& b, double dt);

/// Same step, also returning d(next)/d(state) and d(next)/d(input), including the
/// renormalisation.
RigidState step(const RigidState& s, const WrenchCommand& u, const BodyParams& b, double dt, StateMatrix& a,
                InputMatrix& bu);

WrenchCommand hover_command(const BodyParams& b);

/// Angular momentum R(q) I omega in the inertial frame.
Vec3 inertial_angular_momentum(const RigidState& s, const BodyParams& b);
double rotational_energy(const RigidState& s, const BodyParams& b);

}  // namespace mars
