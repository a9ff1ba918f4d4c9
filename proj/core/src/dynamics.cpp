#include "mars/dynamics.hpp"

#include <stdexcept>

#include "mars/errors.hpp"

namespace mars {
namespace {

Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return s;
}

// Body z axis expressed in the inertial frame, homogeneous in q.
Vec3 thrust_axis(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return Vec3(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), w * w - x * x - y * y + z * z);
}

struct Model {
  const BodyParams& b;
  Mat3 inertia_inv;

  explicit Model(const BodyParams& body) : b(body), inertia_inv(body.inertia.inverse()) {}

  StateVector f(const StateVector& x, const Vec4& u) const {
    StateVector d;
    const Vec4 q = x.segment<4>(3);
    const Vec3 om = x.segment<3>(10);
    d.segment<3>(0) = x.segment<3>(7);
    d.segment<4>(3) = 0.5 * quat_multiply(q, Vec4(0.0, om.x(), om.y(), om.z()));
    d.segment<3>(7) = (u[0] / b.mass) * thrust_axis(q) - Vec3(0.0, 0.0, b.gravity);
    d.segment<3>(10) = inertia_inv * (u.tail<3>() - om.cross(b.inertia * om));
    return d;
  }

  void jac(const StateVector& x, const Vec4& u, StateMatrix& jx, InputMatrix& ju) const {
    jx.setZero();
    ju.setZero();
    const double w = x[3], qx = x[4], qy = x[5], qz = x[6];
    const double a = x[10], bb = x[11], c = x[12];
    jx.block<3, 3>(0, 7).setIdentity();

    Eigen::Matrix4d om;
    om << 0.0, -a, -bb, -c,
          a, 0.0, c, -bb,
          bb, -c, 0.0, a,
          c, bb, -a, 0.0;
    jx.block<4, 4>(3, 3) = 0.5 * om;
    Eigen::Matrix<double, 4, 3> xi;
    xi << -qx, -qy, -qz,
          w, -qz, qy,
          qz, w, -qx,
          -qy, qx, w;
    jx.block<4, 3>(3, 10) = 0.5 * xi;

    Eigen::Matrix<double, 3, 4> dz;
    dz << 2.0 * qy, 2.0 * qz, 2.0 * w, 2.0 * qx,
          -2.0 * qx, -2.0 * w, 2.0 * qz, 2.0 * qy,
          2.0 * w, -2.0 * qx, -2.0 * qy, 2.0 * qz;
    jx.block<3, 4>(7, 3) = (u[0] / b.mass) * dz;
    ju.block<3, 1>(7, 0) = thrust_axis(x.segment<4>(3)) / b.mass;

    const Vec3 omv = x.segment<3>(10);
    jx.block<3, 3>(10, 10) = inertia_inv * (-skew(omv) * b.inertia + skew(b.inertia * omv));
    ju.block<3, 3>(10, 1) = inertia_inv;
  }
};

void check_dt(double dt) {
  if (!(dt > 0.0) || dt > 0.05) throw std::invalid_argument("integration step must satisfy 0 < dt <= 0.05");
}

RigidState finish(StateVector x) {
  const double n = x.segment<4>(3).norm();
  x.segment<4>(3) /= n;
  if (!x.allFinite()) throw NonFiniteState("integration produced a non-finite state");
  return RigidState::from_vector(x);
}

}  // namespace

StateVector RigidState::to_vector() const {
  StateVector x;
  x << p, q, v, omega;
  return x;
}

RigidState RigidState::from_vector(const StateVector& x) {
  RigidState s;
  s.p = x.segment<3>(0);
  s.q = x.segment<4>(3);
  s.v = x.segment<3>(7);
  s.omega = x.segment<3>(10);
  return s;
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
  return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Vec4 quat_conjugate(const Vec4& q) { return Vec4(q[0], -q[1], -q[2], -q[3]); }

Mat3 rotation_matrix(const Vec4& q) {
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
}

StateVector state_derivative(const RigidState& s, const WrenchCommand& u, const BodyParams& b) {
  return Model(b).f(s.to_vector(), u.to_vector());
}

void derivative_jacobians(const StateVector& x, const Vec4& u, const BodyParams& b, StateMatrix& jx,
                          InputMatrix& ju) {
  Model(b).jac(x, u, jx, ju);
}

RigidState step(const RigidState& s, const WrenchCommand& u, const BodyParams& b, double dt) {
  check_dt(dt);
  const Model m(b);
  const StateVector x = s.to_vector();
  const Vec4 uv = u.to_vector();
  const StateVector k1 = m.f(x, uv);
  const StateVector k2 = m.f(x + 0.5 * dt * k1, uv);
  const StateVector k3 = m.f(x + 0.5 * dt * k2, uv);
  const StateVector k4 = m.f(x + dt * k3, uv);
  return finish(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

RigidState step(const RigidState& s, const WrenchCommand& u, const BodyParams& b, double dt, StateMatrix& a,
                InputMatrix& bu) {
  check_dt(dt);
  const Model m(b);
  const StateVector x = s.to_vector();
  const Vec4 uv = u.to_vector();
  const StateMatrix eye = StateMatrix::Identity();
  StateMatrix j;
  InputMatrix ju;

  const StateVector k1 = m.f(x, uv);
  m.jac(x, uv, j, ju);
  const StateMatrix a1 = j;
  const InputMatrix b1 = ju;

  const StateVector x2 = x + 0.5 * dt * k1;
  const StateVector k2 = m.f(x2, uv);
  m.jac(x2, uv, j, ju);
  const StateMatrix a2 = j * (eye + 0.5 * dt * a1);
  const InputMatrix b2 = j * (0.5 * dt * b1) + ju;

  const StateVector x3 = x + 0.5 * dt * k2;
  const StateVector k3 = m.f(x3, uv);
  m.jac(x3, uv, j, ju);
  const StateMatrix a3 = j * (eye + 0.5 * dt * a2);
  const InputMatrix b3 = j * (0.5 * dt * b2) + ju;

  const StateVector x4 = x + dt * k3;
  const StateVector k4 = m.f(x4, uv);
  m.jac(x4, uv, j, ju);
  const StateMatrix a4 = j * (eye + dt * a3);
  const InputMatrix b4 = j * (dt * b3) + ju;

  const StateVector raw = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  a = eye + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  bu = (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4);

  const Vec4 qr = raw.segment<4>(3);
  const double n = qr.norm();
  const Vec4 qh = qr / n;
  const Eigen::Matrix4d normal = (Eigen::Matrix4d::Identity() - qh * qh.transpose()) / n;
  a.middleRows<4>(3) = (normal * a.middleRows<4>(3)).eval();
  bu.middleRows<4>(3) = (normal * bu.middleRows<4>(3)).eval();
  return finish(raw);
}

WrenchCommand hover_command(const BodyParams& b) { return {b.mass * b.gravity, Vec3::Zero()}; }

Vec3 inertial_angular_momentum(const RigidState& s, const BodyParams& b) {
  return rotation_matrix(s.q) * (b.inertia * s.omega);
}

double rotational_energy(const RigidState& s, const BodyParams& b) {
  return 0.5 * s.omega.dot(b.inertia * s.omega);
}

}  // namespace mars
