#include <doctest.h>

#include <cmath>
#include <random>

#include "mars/errors.hpp"
#include "mars/magnetics.hpp"

using namespace mars;

namespace {

// Written out component by component, separate from the library routine.
Vec3 naive_dipole(const Vec3& at, const Vec3& m, const Vec3& p) {
  const double rx = p.x() - at.x(), ry = p.y() - at.y(), rz = p.z() - at.z();
  const double r2 = rx * rx + ry * ry + rz * rz;
  const double r = std::sqrt(r2);
  const double dot = m.x() * rx + m.y() * ry + m.z() * rz;
  const double a = 3.0 * dot / (r2 * r2 * r);
  const double b = 1.0 / (r2 * r);
  return 1e-7 * Vec3(a * rx - b * m.x(), a * ry - b * m.y(), a * rz - b * m.z());
}

LatticeSpec small_spec(int layers) {
  LatticeSpec s;
  s.layers = layers;
  s.magnets_per_layer = 8;
  return s;
}

}  // namespace

TEST_CASE("dipole field on axis and in the equatorial plane") {
  CHECK((dipole_field(Vec3::Zero(), Vec3::UnitZ(), Vec3(0, 0, 1)) - Vec3(0, 0, 2e-7)).norm() < 1e-20);
  CHECK((dipole_field(Vec3::Zero(), Vec3::UnitZ(), Vec3(1, 0, 0)) - Vec3(0, 0, -1e-7)).norm() < 1e-20);
  const Vec3 b1 = dipole_field(Vec3(0.1, 0, 0), Vec3::UnitX(), Vec3(0.3, 0.2, -0.1));
  const Vec3 b2 = dipole_field(Vec3(0.1, 0, 0), 2.0 * Vec3::UnitX(), Vec3(0.3, 0.2, -0.1));
  CHECK((b2 - 2.0 * b1).norm() < 1e-20);
  CHECK_THROWS_AS(dipole_field(Vec3(1, 2, 3), Vec3::UnitZ(), Vec3(1, 2, 3)), CoincidentPoint);
}

TEST_CASE("objectives agree with a naive double loop") {
  LatticeSpec s;
  const std::vector<Vec3> pos = docking_lattice(1, 14, s.radius, s.pitch);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> o(0, 5);
  std::vector<Magnet> magnets;
  for (const Vec3& p : pos) magnets.push_back({p, orientation_axis(o(rng))});
  const std::vector<Vec3> pts = observation_ring(s, 32);
  double sum_norm = 0.0, norm_sum = 0.0;
  std::size_t count = 0;
  for (const Vec3& p : pts) {
    if (p.z() != 0.0) continue;
    Vec3 total = Vec3::Zero();
    double mags = 0.0;
    for (const Magnet& m : magnets) {
      const Vec3 b = naive_dipole(m.position, m.moment, p);
      total += b;
      mags += b.norm();
    }
    sum_norm += mags;
    norm_sum += total.norm();
    ++count;
  }
  REQUIRE(count == 32);
  std::vector<Vec3> layer0;
  for (const Vec3& p : pts)
    if (p.z() == 0.0) layer0.push_back(p);
  CHECK(field_objective(magnets, layer0) == doctest::Approx(sum_norm / 32).epsilon(1e-12));
  CHECK(superposed_field_norm(magnets, layer0) == doctest::Approx(norm_sum / 32).epsilon(1e-12));
}

TEST_CASE("lattice and observation geometry") {
  const auto lat = docking_lattice(2, 14, 0.02, 0.006);
  REQUIRE(lat.size() == 28);
  for (const Vec3& p : lat) CHECK(p.head<2>().norm() == doctest::Approx(0.02));
  CHECK(lat[0].z() == 0.0);
  CHECK(lat[14].z() == doctest::Approx(0.006));
  LatticeSpec s;
  s.layers = 3;
  const auto ring = observation_ring(s, 16);
  CHECK(ring.size() == 48);
  for (const Vec3& p : ring) CHECK(p.head<2>().norm() == doctest::Approx(0.021));
}

TEST_CASE("arrangement halves use opposite orientations") {
  const LatticeSpec s = small_spec(2);
  const MagnetArrangement a = make_arrangement(s, 2, {0, 4});
  REQUIRE(a.magnets.size() == 16);
  for (int k = 0; k < 4; ++k) CHECK(a.magnets[static_cast<std::size_t>(k)].moment == Vec3::UnitX());
  for (int k = 4; k < 8; ++k) CHECK(a.magnets[static_cast<std::size_t>(k)].moment == -Vec3::UnitX());
  CHECK(a.magnets[8].moment == Vec3::UnitZ());
  CHECK(a.magnets[15].moment == -Vec3::UnitZ());
  for (int o = 0; o < 6; ++o) {
    CHECK(orientation_axis(opposite_orientation(o)) == -orientation_axis(o));
  }
}

TEST_CASE("objective is unchanged by a global sign flip or a quarter turn") {
  const LatticeSpec s = small_spec(2);
  const auto pts = observation_ring(s, 16);
  const MagnetArrangement a = make_arrangement(s, 2, {2, 4});
  const MagnetArrangement b = make_arrangement(s, 2, {3, 5});
  CHECK(field_objective(a, pts) == doctest::Approx(field_objective(b, pts)).epsilon(1e-12));

  const Mat3 r = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
  std::vector<Magnet> rot = a.magnets;
  for (Magnet& m : rot) {
    m.position = r * m.position;
    m.moment = r * m.moment;
  }
  std::vector<Vec3> rpts = pts;
  for (Vec3& p : rpts) p = r * p;
  CHECK(field_objective(rot, rpts) == doctest::Approx(field_objective(a.magnets, pts)).epsilon(1e-12));
}

TEST_CASE("single-layer search is exhaustive") {
  const LatticeSpec s = small_spec(1);
  const auto pts = observation_ring(s);
  double best = 0.0;
  for (int o = 0; o < 6; ++o) best = std::max(best, field_objective(make_arrangement(s, 1, {o}), pts));
  const ArrangementSearch r = optimize_arrangement(s, pts, std::numeric_limits<double>::infinity(), 1);
  REQUIRE(r.history.size() == 1);
  CHECK(r.history[0] == doctest::Approx(best).epsilon(1e-12));
  CHECK_FALSE(r.target_reached);
}

TEST_CASE("a zero target stops after one layer") {
  const LatticeSpec s = small_spec(4);
  const ArrangementSearch r = optimize_arrangement(s, observation_ring(s), 0.0, 1);
  CHECK(r.history.size() == 1);
  CHECK(r.target_reached);
  CHECK(r.best.layers == 1);
}

TEST_CASE("layer-wise search is monotone, deterministic and beats the baseline") {
  for (int layers : {4, 8}) {
    CAPTURE(layers);
    const LatticeSpec s = small_spec(layers);
    const auto pts = observation_ring(s);
    const ArrangementSearch a = optimize_arrangement(s, pts, std::numeric_limits<double>::infinity(), 42);
    const ArrangementSearch b = optimize_arrangement(s, pts, std::numeric_limits<double>::infinity(), 42);
    REQUIRE(a.history.size() == static_cast<std::size_t>(layers));
    for (std::size_t k = 1; k < a.history.size(); ++k) CHECK(a.history[k] >= a.history[k - 1]);
    CHECK(a.history == b.history);
    CHECK(a.best.orientation == b.best.orientation);
    CHECK(a.history.back() == doctest::Approx(field_objective(a.best, pts)).epsilon(1e-12));
    CHECK(a.history.back() >= field_objective(uniform_baseline(s, layers), pts));
  }
}
