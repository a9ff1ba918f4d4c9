#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mars {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// One propeller of a unit. `offset` is relative to the unit's centre of mass and
/// `spin_sign` follows the (-,-,+,+) pattern over rotor index j = 1..4.
struct RotorSpec {
  Vec3 offset = Vec3::Zero();
  int spin_sign = -1;
  double f_min = 0.0;  // N
  double f_max = 0.0;  // N
  double c_z = 0.0;    // m, yaw torque per newton of thrust
};

struct UnitSpec {
  double mass = 0.0;  // kg
  Vec3 position = Vec3::Zero();
  std::array<RotorSpec, 4> rotors{};
  Mat3 inertia_local = Mat3::Zero();  // about the unit's own centroid
};

/// Rigidly attached payload, folded into mass, centroid and inertia.
struct PayloadSpec {
  double mass = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 inertia_local = Mat3::Zero();
};

struct MarsConfig {
  std::vector<UnitSpec> units;
  std::optional<PayloadSpec> payload;
  double gravity = 9.81;

  std::size_t unit_count() const noexcept { return units.size(); }
  std::size_t rotor_count() const noexcept { return 4 * units.size(); }
};

/// Spin sign of rotor j (0-based) in the (-,-,+,+) pattern.
constexpr int expected_spin_sign(int j) noexcept { return j < 2 ? -1 : +1; }

/// Parses and validates a JSON configuration document.
MarsConfig load_config(std::string_view text);
MarsConfig load_config_file(const std::filesystem::path& path);

/// Throws ValidationError naming the first violated field.
void validate(const MarsConfig& config);

/// Unit modelled on a 1.5 kg x-frame quadrotor with rotors at (+-0.1625, +-0.1625).
UnitSpec default_unit();

/// Rectangular rows x cols lattice of copies of `unit`, centred on the origin.
/// Rows run along y, columns along x.
MarsConfig build_grid_config(int rows, int cols, double spacing, const UnitSpec& unit);

double total_mass(const MarsConfig& config);
Vec3 centroid(const MarsConfig& config);
Mat3 composite_inertia(const MarsConfig& config, const Vec3& about);

/// World-frame position of rotor j of unit i.
inline Vec3 rotor_position(const UnitSpec& unit, int j) {
  return unit.position + unit.rotors[static_cast<std::size_t>(j)].offset;
}

MarsConfig translated(const MarsConfig& config, const Vec3& shift);

/// Rotates the whole assembly (positions, rotor offsets, local inertias, payload)
/// by `theta` about the vertical axis through `pivot`.
MarsConfig rotated_about_z(const MarsConfig& config, const Vec3& pivot, double theta);

/// Lower/upper per-rotor force bounds, unit-major.
Eigen::VectorXd rotor_force_lower(const MarsConfig& config);
Eigen::VectorXd rotor_force_upper(const MarsConfig& config);

}  // namespace mars
