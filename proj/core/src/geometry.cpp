#include "mars/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mars/errors.hpp"

namespace mars {
namespace {

using nlohmann::json;

constexpr double kCoplanarTolerance = 1e-9;

std::string path_of(std::size_t unit, std::optional<std::size_t> rotor = std::nullopt) {
  std::string p = "units[" + std::to_string(unit) + "]";
  if (rotor) p += ".rotors[" + std::to_string(*rotor) + "]";
  return p;
}

double number_at(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key)) throw ValidationError(key, where + " is missing '" + key + "'");
  const json& v = node.at(key);
  if (!v.is_number()) throw ParseError(where + "." + key + " must be a number");
  return v.get<double>();
}

Vec3 vec3_at(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key)) throw ValidationError(key, where + " is missing '" + key + "'");
  const json& v = node.at(key);
  if (!v.is_array() || v.size() != 3) throw ParseError(where + "." + key + " must be [x, y, z]");
  Vec3 out;
  for (int k = 0; k < 3; ++k) {
    if (!v[static_cast<std::size_t>(k)].is_number()) {
      throw ParseError(where + "." + key + " must contain numbers");
    }
    out[k] = v[static_cast<std::size_t>(k)].get<double>();
  }
  return out;
}

// Accepts either a 3-vector (principal moments) or a 3x3 nested array.
Mat3 inertia_at(const json& v, const std::string& where) {
  Mat3 out = Mat3::Zero();
  if (v.is_array() && v.size() == 3 && v[0].is_number()) {
    for (int k = 0; k < 3; ++k) out(k, k) = v[static_cast<std::size_t>(k)].get<double>();
    return out;
  }
  if (v.is_array() && v.size() == 3) {
    for (std::size_t r = 0; r < 3; ++r) {
      if (!v[r].is_array() || v[r].size() != 3) {
        throw ParseError(where + ".inertia must be a 3-vector or a 3x3 array");
      }
      for (std::size_t c = 0; c < 3; ++c) {
        if (!v[r][c].is_number()) throw ParseError(where + ".inertia must contain numbers");
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c].get<double>();
      }
    }
    return out;
  }
  throw ParseError(where + ".inertia must be a 3-vector or a 3x3 array");
}

bool is_symmetric(const Mat3& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool is_positive_definite(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 0.0;
}

bool is_positive_semidefinite(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

Mat3 point_mass_shift(double mass, const Vec3& d) {
  return mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
}

Mat3 rot_z(double theta) {
  return Eigen::AngleAxisd(theta, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace

UnitSpec default_unit() {
  UnitSpec u;
  u.mass = 1.5;
  u.position = Vec3::Zero();
  constexpr double a = 0.1625;
  // Quadrant layout: 1 (+x,+y), 2 (-x,-y), 3 (+x,-y), 4 (-x,+y).
  const std::array<Vec2, 4> xy{Vec2(a, a), Vec2(-a, -a), Vec2(a, -a), Vec2(-a, a)};
  for (int j = 0; j < 4; ++j) {
    RotorSpec& r = u.rotors[static_cast<std::size_t>(j)];
    r.offset = Vec3(xy[static_cast<std::size_t>(j)].x(), xy[static_cast<std::size_t>(j)].y(), 0.0);
    r.spin_sign = expected_spin_sign(j);
    r.f_min = 0.0;
    r.f_max = 7.0;
    r.c_z = 0.016;
  }
  u.inertia_local = Vec3(0.029125, 0.029125, 0.055225).asDiagonal();
  return u;
}

MarsConfig load_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed configuration document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("configuration document must be a JSON object");
  if (!doc.contains("units")) throw ValidationError("units", "document has no 'units' array");
  if (!doc.at("units").is_array()) throw ParseError("'units' must be an array");

  const UnitSpec defaults = default_unit();
  MarsConfig cfg;
  const json& units = doc.at("units");
  for (std::size_t i = 0; i < units.size(); ++i) {
    const json& un = units[i];
    const std::string where = path_of(i);
    if (!un.is_object()) throw ParseError(where + " must be an object");
    UnitSpec u;
    u.mass = number_at(un, "mass", where);
    u.position = vec3_at(un, "position", where);
    u.inertia_local = un.contains("inertia") ? inertia_at(un.at("inertia"), where)
                                             : defaults.inertia_local;
    if (!un.contains("rotors") || !un.at("rotors").is_array()) {
      throw ValidationError("rotors", where + " needs a 'rotors' array");
    }
    const json& rotors = un.at("rotors");
    if (rotors.size() != 4) {
      throw ValidationError("rotors", where + " must have exactly 4 rotors, got " +
                                          std::to_string(rotors.size()));
    }
    for (std::size_t j = 0; j < 4; ++j) {
      const json& rn = rotors[j];
      const std::string rwhere = path_of(i, j);
      if (!rn.is_object()) throw ParseError(rwhere + " must be an object");
      RotorSpec& r = u.rotors[j];
      r.offset = vec3_at(rn, "offset", rwhere);
      if (!rn.contains("spin_sign") || !rn.at("spin_sign").is_number_integer()) {
        throw ValidationError("spin_sign", rwhere + " needs an integer spin_sign");
      }
      r.spin_sign = rn.at("spin_sign").get<int>();
      r.f_min = number_at(rn, "f_min", rwhere);
      r.f_max = number_at(rn, "f_max", rwhere);
      r.c_z = number_at(rn, "c_z", rwhere);
    }
    cfg.units.push_back(u);
  }

  if (doc.contains("payload") && !doc.at("payload").is_null()) {
    const json& pn = doc.at("payload");
    if (!pn.is_object()) throw ParseError("payload must be an object");
    PayloadSpec p;
    p.mass = number_at(pn, "mass", "payload");
    p.position = vec3_at(pn, "position", "payload");
    if (pn.contains("inertia")) p.inertia_local = inertia_at(pn.at("inertia"), "payload");
    cfg.payload = p;
  }
  if (doc.contains("gravity")) cfg.gravity = number_at(doc, "gravity", "document");

  validate(cfg);
  return cfg;
}

MarsConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open configuration file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

void validate(const MarsConfig& config) {
  if (config.units.empty()) throw ValidationError("units", "at least one unit is required");
  if (!std::isfinite(config.gravity) || config.gravity < 0.0) {
    throw ValidationError("gravity", "gravity must be finite and non-negative");
  }

  std::optional<double> rotor_plane;
  for (std::size_t i = 0; i < config.units.size(); ++i) {
    const UnitSpec& u = config.units[i];
    const std::string where = path_of(i);
    if (!(u.mass > 0.0) || !std::isfinite(u.mass)) {
      throw ValidationError("mass", where + " mass must be positive");
    }
    if (!u.position.allFinite()) throw ValidationError("position", where + " position must be finite");
    if (!u.inertia_local.allFinite() || !is_symmetric(u.inertia_local) ||
        !is_positive_definite(u.inertia_local)) {
      throw ValidationError("inertia", where + " inertia must be symmetric positive definite");
    }
    for (std::size_t j = 0; j < 4; ++j) {
      const RotorSpec& r = u.rotors[j];
      const std::string rwhere = path_of(i, j);
      if (!r.offset.allFinite()) throw ValidationError("offset", rwhere + " offset must be finite");
      if (r.spin_sign != expected_spin_sign(static_cast<int>(j))) {
        throw ValidationError("spin_sign", rwhere + " spin_sign must follow the (-1,-1,+1,+1) pattern");
      }
      if (!std::isfinite(r.f_min) || !std::isfinite(r.f_max) || r.f_min < 0.0) {
        throw ValidationError("f_min", rwhere + " needs 0 <= f_min");
      }
      if (!(r.f_min < r.f_max)) throw ValidationError("f_min", rwhere + " needs f_min < f_max");
      if (!(r.c_z > 0.0) || !std::isfinite(r.c_z)) {
        throw ValidationError("c_z", rwhere + " c_z must be positive");
      }
      const double z = u.position.z() + r.offset.z();
      if (!rotor_plane) {
        rotor_plane = z;
      } else if (std::abs(z - *rotor_plane) > kCoplanarTolerance) {
        throw ValidationError("position", rwhere + " rotor plane is not coplanar with the first rotor");
      }
    }
    for (std::size_t k = 0; k < i; ++k) {
      if ((config.units[k].position - u.position).norm() <= kCoplanarTolerance) {
        throw ValidationError("position", where + " coincides with " + path_of(k));
      }
    }
  }

  if (config.payload) {
    const PayloadSpec& p = *config.payload;
    if (!std::isfinite(p.mass) || p.mass < 0.0) {
      throw ValidationError("payload.mass", "payload mass must be non-negative");
    }
    if (!p.position.allFinite()) throw ValidationError("payload.position", "payload position must be finite");
    if (!p.inertia_local.allFinite() || !is_symmetric(p.inertia_local) ||
        !is_positive_semidefinite(p.inertia_local)) {
      throw ValidationError("payload.inertia", "payload inertia must be symmetric positive semidefinite");
    }
  }
}

MarsConfig build_grid_config(int rows, int cols, double spacing, const UnitSpec& unit) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("grid needs rows, cols >= 1");
  if (!(spacing > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  MarsConfig cfg;
  const double x0 = -0.5 * spacing * (cols - 1);
  const double y0 = -0.5 * spacing * (rows - 1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      UnitSpec u = unit;
      u.position = Vec3(x0 + spacing * c, y0 + spacing * r, unit.position.z());
      cfg.units.push_back(u);
    }
  }
  return cfg;
}

double total_mass(const MarsConfig& config) {
  double m = 0.0;
  for (const UnitSpec& u : config.units) m += u.mass;
  if (config.payload) m += config.payload->mass;
  return m;
}

Vec3 centroid(const MarsConfig& config) {
  Vec3 moment = Vec3::Zero();
  for (const UnitSpec& u : config.units) moment += u.mass * u.position;
  if (config.payload) moment += config.payload->mass * config.payload->position;
  return moment / total_mass(config);
}

Mat3 composite_inertia(const MarsConfig& config, const Vec3& about) {
  Mat3 inertia = Mat3::Zero();
  for (const UnitSpec& u : config.units) {
    inertia += u.inertia_local + point_mass_shift(u.mass, u.position - about);
  }
  if (config.payload) {
    const PayloadSpec& p = *config.payload;
    inertia += p.inertia_local + point_mass_shift(p.mass, p.position - about);
  }
  return 0.5 * (inertia + inertia.transpose());
}

MarsConfig translated(const MarsConfig& config, const Vec3& shift) {
  MarsConfig out = config;
  for (UnitSpec& u : out.units) u.position += shift;
  if (out.payload) out.payload->position += shift;
  return out;
}

MarsConfig rotated_about_z(const MarsConfig& config, const Vec3& pivot, double theta) {
  const Mat3 r = rot_z(theta);
  MarsConfig out = config;
  for (UnitSpec& u : out.units) {
    u.position = pivot + r * (u.position - pivot);
    for (RotorSpec& rot : u.rotors) rot.offset = r * rot.offset;
    u.inertia_local = r * u.inertia_local * r.transpose();
  }
  if (out.payload) {
    out.payload->position = pivot + r * (out.payload->position - pivot);
    out.payload->inertia_local = r * out.payload->inertia_local * r.transpose();
  }
  return out;
}

Eigen::VectorXd rotor_force_lower(const MarsConfig& config) {
  Eigen::VectorXd lo(static_cast<Eigen::Index>(config.rotor_count()));
  Eigen::Index k = 0;
  for (const UnitSpec& u : config.units) {
    for (const RotorSpec& r : u.rotors) lo[k++] = r.f_min;
  }
  return lo;
}

Eigen::VectorXd rotor_force_upper(const MarsConfig& config) {
  Eigen::VectorXd hi(static_cast<Eigen::Index>(config.rotor_count()));
  Eigen::Index k = 0;
  for (const UnitSpec& u : config.units) {
    for (const RotorSpec& r : u.rotors) hi[k++] = r.f_max;
  }
  return hi;
}

}  // namespace mars
