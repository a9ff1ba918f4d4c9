#include <doctest.h>

#include <random>
#include <string>

#include "fixtures.hpp"
#include "mars/errors.hpp"
#include "mars/geometry.hpp"

using namespace mars;
using mars::testing::grid;

namespace {

const char* kOneUnit = R"({
  "units": [{
    "mass": 1.5, "position": [0, 0, 0],
    "rotors": [
      {"offset": [0.1625, 0.1625, 0], "spin_sign": -1, "f_min": 0, "f_max": 7, "c_z": 0.016},
      {"offset": [-0.1625, -0.1625, 0], "spin_sign": -1, "f_min": 0, "f_max": 7, "c_z": 0.016},
      {"offset": [0.1625, -0.1625, 0], "spin_sign": 1, "f_min": 0, "f_max": 7, "c_z": 0.016},
      {"offset": [-0.1625, 0.1625, 0], "spin_sign": 1, "f_min": 0, "f_max": 7, "c_z": 0.016}
    ]
  }]
})";

std::string replaced(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

template <class E>
std::string field_of(const std::string& doc) {
  try {
    load_config(doc);
  } catch (const E& e) {
    if constexpr (std::is_same_v<E, ValidationError>) return e.field();
    return "thrown";
  }
  return "";
}

}  // namespace

TEST_CASE("load_config accepts a minimal one-unit document") {
  const MarsConfig cfg = load_config(kOneUnit);
  CHECK(cfg.unit_count() == 1);
  CHECK(cfg.gravity == doctest::Approx(9.81));
  CHECK(cfg.units[0].rotors[2].spin_sign == 1);
}

TEST_CASE("load_config rejects invariant violations by field") {
  CHECK(field_of<ValidationError>(replaced(kOneUnit, R"("f_min": 0, "f_max": 7, "c_z": 0.016},
      {"offset": [-0.1625, -0.1625)", R"("f_min": 8, "f_max": 7, "c_z": 0.016},
      {"offset": [-0.1625, -0.1625)")) == "f_min");
  CHECK(field_of<ValidationError>(replaced(kOneUnit, R"("mass": 1.5)", R"("mass": -1)")) == "mass");
  CHECK(field_of<ValidationError>(replaced(kOneUnit, R"("spin_sign": 1, "f_min")", R"("spin_sign": -1, "f_min")")) ==
        "spin_sign");
  CHECK(field_of<ValidationError>(replaced(kOneUnit, "[0.1625, 0.1625, 0]", "[0.1625, 0.1625, 0.01]")) == "position");
  CHECK(field_of<ParseError>(R"({"units": [)") == "thrown");
}

TEST_CASE("two-unit document keeps the lattice spacing") {
  const std::string u1 = std::string(kOneUnit).substr(std::string(kOneUnit).find('{', 2));
  const std::string unit = u1.substr(0, u1.rfind(']'));
  const std::string unit_b = replaced(unit, R"("position": [0, 0, 0])", R"("position": [0.65, 0, 0])");
  const MarsConfig cfg = load_config("{\"units\": [" + unit + "," + unit_b + "]}");
  REQUIRE(cfg.unit_count() == 2);
  CHECK((cfg.units[1].position - cfg.units[0].position).norm() == doctest::Approx(0.65));
}

TEST_CASE("coincident unit positions are rejected") {
  MarsConfig cfg = grid(2, 1);
  cfg.units[1].position = cfg.units[0].position;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}

TEST_CASE("build_grid_config centres the lattice") {
  const MarsConfig a = grid(1, 1);
  CHECK(a.units[0].position.norm() == 0.0);
  const MarsConfig b = grid(2, 1);
  CHECK(b.units[0].position.x() == doctest::Approx(-0.325));
  CHECK(b.units[1].position.x() == doctest::Approx(0.325));
  const MarsConfig c = grid(2, 2);
  for (const UnitSpec& u : c.units) {
    CHECK(std::abs(u.position.x()) == doctest::Approx(0.325));
    CHECK(std::abs(u.position.y()) == doctest::Approx(0.325));
  }
  CHECK(total_mass(a) == default_unit().mass);
}

TEST_CASE("total mass") {
  CHECK(total_mass(grid(1, 1)) == doctest::Approx(1.5));
  CHECK(total_mass(grid(2, 1)) == doctest::Approx(3.0));
  CHECK(total_mass(mars::testing::row2_payload()) == doctest::Approx(3.6));
}

TEST_CASE("centroid is the mass-weighted mean") {
  CHECK(centroid(grid(2, 1)).norm() < 1e-15);

  MarsConfig two = grid(2, 1);
  two.units[0].mass = 1.0;
  two.units[0].position = Vec3::Zero();
  two.units[1].mass = 3.0;
  two.units[1].position = Vec3(1.0, 0.0, 0.0);
  CHECK(centroid(two).x() == doctest::Approx(0.75));

  // Frozen from a direct mass-moment sum: (1.5 * -0.325 + 1.5 * 0.325 + 0.6 * 0) / 3.6 in x,
  // (0.6 * -0.1) / 3.6 in z.
  const Vec3 c = centroid(mars::testing::row2_payload());
  CHECK(c.x() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(c.z() == doctest::Approx(-0.016666666666666666).epsilon(1e-14));

  const MarsConfig l = mars::testing::l3();
  Vec3 moment = Vec3::Zero();
  for (const UnitSpec& u : l.units) moment += u.mass * (u.position - centroid(l));
  CHECK(moment.norm() < 1e-12);
}

TEST_CASE("centroid is translation equivariant") {
  const MarsConfig l = mars::testing::l3();
  const Vec3 t(0.3, -1.2, 0.7);
  CHECK((centroid(translated(l, t)) - centroid(l) - t).norm() < 1e-12);
}

TEST_CASE("composite inertia") {
  MarsConfig pts = grid(2, 1);
  for (UnitSpec& u : pts.units) {
    u.mass = 2.0;
    u.inertia_local.setZero();
  }
  pts.units[0].position = Vec3(-0.4, 0.0, 0.0);
  pts.units[1].position = Vec3(0.4, 0.0, 0.0);
  const Mat3 i = composite_inertia(pts, Vec3::Zero());
  CHECK(i(0, 0) == doctest::Approx(0.0));
  CHECK(i(1, 1) == doctest::Approx(2 * 2.0 * 0.16));
  CHECK(i(2, 2) == doctest::Approx(2 * 2.0 * 0.16));

  const MarsConfig one = grid(1, 1);
  CHECK((composite_inertia(one, centroid(one)) - default_unit().inertia_local).norm() < 1e-15);

  // 2x2 grid: local tensor plus m (|d|^2 I - d d') summed unit by unit.
  const MarsConfig sq = grid(2, 2);
  Mat3 oracle = Mat3::Zero();
  for (const UnitSpec& u : sq.units) {
    const Vec3 d = u.position;
    oracle += u.inertia_local;
    oracle(0, 0) += u.mass * (d.y() * d.y() + d.z() * d.z());
    oracle(1, 1) += u.mass * (d.x() * d.x() + d.z() * d.z());
    oracle(2, 2) += u.mass * (d.x() * d.x() + d.y() * d.y());
    oracle(0, 1) -= u.mass * d.x() * d.y();
    oracle(1, 0) -= u.mass * d.x() * d.y();
  }
  CHECK((composite_inertia(sq, Vec3::Zero()) - oracle).norm() < 1e-13);
}

TEST_CASE("inertia about the centroid has minimal trace") {
  const MarsConfig l = mars::testing::row2_payload();
  const Vec3 c = centroid(l);
  const double base = composite_inertia(l, c).trace();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Vec3 p = c + Vec3(u(rng), u(rng), u(rng));
    CHECK(composite_inertia(l, p).trace() >= base - 1e-12);
  }
}
