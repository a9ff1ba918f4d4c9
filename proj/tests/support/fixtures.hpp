#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mars/geometry.hpp"

namespace mars::testing {

inline constexpr double kSpacing = 0.65;

// "AxB" naming: A units along x, B along y.
inline MarsConfig grid(int along_x, int along_y) {
  return build_grid_config(along_y, along_x, kSpacing, default_unit());
}

inline MarsConfig from_positions(const std::vector<Vec2>& xy) {
  MarsConfig cfg;
  for (const Vec2& p : xy) {
    UnitSpec u = default_unit();
    u.position = Vec3(p.x(), p.y(), 0.0);
    cfg.units.push_back(u);
  }
  return cfg;
}

inline MarsConfig l3() { return from_positions({{0.0, 0.0}, {kSpacing, 0.0}, {0.0, kSpacing}}); }

inline MarsConfig t4() {
  return from_positions({{-kSpacing, 0.0}, {0.0, 0.0}, {kSpacing, 0.0}, {0.0, -kSpacing}});
}

inline MarsConfig row2_payload() {
  MarsConfig cfg = grid(2, 1);
  PayloadSpec p;
  p.mass = 0.6;
  p.position = Vec3(0.0, 0.0, -0.1);
  cfg.payload = p;
  return cfg;
}

inline std::vector<std::pair<std::string, MarsConfig>> six_configs() {
  return {{"1x1", grid(1, 1)}, {"2x1", grid(2, 1)}, {"3x1", grid(3, 1)},
          {"2x2", grid(2, 2)}, {"L3", l3()},        {"T4", t4()}};
}

// Mirror image across the x axis (y -> -y). Rotors are re-indexed so the spin pattern
// and quadrant order survive the reflection.
inline MarsConfig mirror_x(const MarsConfig& cfg) {
  MarsConfig out = cfg;
  for (UnitSpec& u : out.units) {
    u.position.y() = -u.position.y();
    const auto r = u.rotors;
    // reflected offsets: 1 (+,+) -> (+,-) which is slot 3, etc.
    u.rotors[0] = r[2];
    u.rotors[1] = r[3];
    u.rotors[2] = r[0];
    u.rotors[3] = r[1];
    for (int j = 0; j < 4; ++j) {
      u.rotors[static_cast<std::size_t>(j)].offset.y() = -u.rotors[static_cast<std::size_t>(j)].offset.y();
      u.rotors[static_cast<std::size_t>(j)].spin_sign = expected_spin_sign(j);
    }
  }
  return out;
}

// Direct per-rotor evaluation of the rotated torque arms; independent of the
// library's grouped-sum code.
struct TorqueSums {
  double x_pos = 0.0;
  double x_neg = 0.0;
  double y_pos = 0.0;
  double y_neg = 0.0;
};

inline TorqueSums torque_sums_oracle(const MarsConfig& cfg, double theta, const Eigen::VectorXd* f = nullptr) {
  double m = 0.0;
  Vec3 c = Vec3::Zero();
  for (const UnitSpec& u : cfg.units) {
    m += u.mass;
    c += u.mass * u.position;
  }
  if (cfg.payload) {
    m += cfg.payload->mass;
    c += cfg.payload->mass * cfg.payload->position;
  }
  c /= m;
  TorqueSums s;
  int k = 0;
  for (const UnitSpec& u : cfg.units) {
    for (const RotorSpec& r : u.rotors) {
      const double fk = f ? (*f)[k] : 1.0;
      ++k;
      const double dx = u.position.x() + r.offset.x() - c.x();
      const double dy = u.position.y() + r.offset.y() - c.y();
      const double rx = std::cos(theta) * dx - std::sin(theta) * dy;
      const double ry = std::sin(theta) * dx + std::cos(theta) * dy;
      const double tx = -ry * fk;
      const double ty = rx * fk;
      (tx > 0 ? s.x_pos : s.x_neg) += tx;
      (ty > 0 ? s.y_pos : s.y_neg) += ty;
    }
  }
  return s;
}

inline double objective_oracle(const MarsConfig& cfg, double theta, double cx = 1.0, double cy = 1.0) {
  const TorqueSums s = torque_sums_oracle(cfg, theta);
  return cx * (s.x_pos - s.x_neg) + cy * (s.y_pos - s.y_neg);
}

}  // namespace mars::testing
