#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mars/abstraction_polytope.hpp"
#include "mars/errors.hpp"
#include "oracles.hpp"

using namespace mars;
using namespace mars::testing;

namespace {

Eigen::Matrix3Xd virtual_vertex_wrenches(const UnequalArmAbstraction& a) {
  const Eigen::Matrix<double, 4, 16> vv = virtual_vertex_matrix(a.f_sum_min, a.f_sum_max);
  return (a.effectiveness * vv).topRows<3>();
}

}  // namespace

TEST_CASE("rotor effectiveness about the centroid") {
  const MarsConfig cfg = l3();
  const Eigen::MatrixXd g = mars_effectiveness(cfg);
  REQUIRE(g.rows() == 4);
  REQUIRE(g.cols() == 12);
  const Vec3 c = centroid(cfg);
  int k = 0;
  for (const UnitSpec& u : cfg.units) {
    for (const RotorSpec& r : u.rotors) {
      const Vec3 d = u.position + r.offset - c;
      CHECK(g(0, k) == 1.0);
      CHECK(g(1, k) == doctest::Approx(-d.y()));
      CHECK(g(2, k) == doctest::Approx(d.x()));
      CHECK(g(3, k) == doctest::Approx(r.spin_sign * r.c_z));
      ++k;
    }
  }
  CHECK((mars_effectiveness(translated(cfg, Vec3(1.0, -2.0, 0.5))) - g).norm() < 1e-12);
}

TEST_CASE("reduced vertex set") {
  const WrenchVertexSet s = reduced_vertex_set(l3());
  CHECK(s.g_mars.rows() == 4);
  CHECK(s.g_mars.cols() == 3);
  CHECK(s.vertices.rows() == 3);
  CHECK(s.vertices.cols() == 8);
  CHECK(s.g_mars.row(3).norm() == 0.0);
  CHECK(s.f_sum_min == doctest::Approx(0.0));
  CHECK(s.f_sum_max == doctest::Approx(84.0));
  CHECK_THROWS_AS(reduced_vertex_set(grid(13, 1)), TooManyUnits);
  CHECK_NOTHROW(reduced_vertex_set(grid(12, 1)));
}

TEST_CASE("virtual vertex matrix bit pattern") {
  const auto vv = virtual_vertex_matrix(0.0, 28.0);
  CHECK(vv.col(0).norm() == 0.0);
  CHECK(vv.col(15).minCoeff() == doctest::Approx(7.0));
  CHECK(vv(2, 4) == doctest::Approx(7.0));
  CHECK(vv(1, 4) == 0.0);
}

TEST_CASE("single unit abstraction reproduces the unit") {
  const MarsConfig one = grid(1, 1);
  const UnequalArmAbstraction a = unequal_arm_abstraction(one);
  CHECK((a.effectiveness - mars_effectiveness(one)).norm() < 1e-9);
  CHECK(a.mass == doctest::Approx(1.5));

  // A lumped unit is a single thrust point at the centroid: no torque arms remain.
  const UnequalArmAbstraction lumped = unequal_arm_abstraction(one, ContainmentModel::kReducedUnitVertex);
  for (const Vec2& p : lumped.virtual_rotors) CHECK(p.norm() < 1e-9);
}

TEST_CASE("grid arm shapes") {
  const UnequalArmAbstraction sq = unequal_arm_abstraction(grid(2, 2));
  for (const Vec2& p : sq.virtual_rotors) CHECK(std::abs(std::abs(p.x()) - std::abs(p.y())) < 1e-7);

  // Units side by side along x give longer x arms, i.e. more pitch authority.
  const UnequalArmAbstraction row = unequal_arm_abstraction(grid(2, 1));
  CHECK(std::abs(row.virtual_rotors[0].x()) > std::abs(row.virtual_rotors[0].y()) + 1e-3);
}

TEST_CASE("virtual vertices lie in the physical wrench polytope") {
  for (const auto& [name, cfg] : six_configs()) {
    CAPTURE(name);
    const Eigen::Matrix3Xd phys = physical_wrench_vertices(cfg);
    const Eigen::MatrixXd g = mars_effectiveness(cfg);
    const Eigen::VectorXd lo = rotor_force_lower(cfg);
    const Eigen::VectorXd hi = rotor_force_upper(cfg);
    for (auto model : {ContainmentModel::kRotorBox, ContainmentModel::kReducedUnitVertex}) {
      const Eigen::Matrix3Xd w = virtual_vertex_wrenches(unequal_arm_abstraction(cfg, model));
      for (Eigen::Index s = 0; s < 16; ++s) {
        CHECK(zonotope_excess(g.topRows<3>(), lo, hi, w.col(s)) < 1e-6);
        if (cfg.unit_count() <= 2) CHECK(hull_distance_l1(phys, w.col(s)) < 1e-6);
      }
    }
  }
}

TEST_CASE("rotor-box model is at least as large as the lumped one") {
  for (const auto& [name, cfg] : six_configs()) {
    CAPTURE(name);
    const double box = unequal_arm_abstraction(cfg, ContainmentModel::kRotorBox).objective;
    const double lumped = unequal_arm_abstraction(cfg, ContainmentModel::kReducedUnitVertex).objective;
    CHECK(box >= lumped - 1e-9);
  }
}

TEST_CASE("explicit hull form agrees with the rotor box") {
  for (const MarsConfig& cfg : {grid(1, 1), grid(2, 1)}) {
    const UnequalArmAbstraction box = unequal_arm_abstraction(cfg);
    const UnequalArmAbstraction hull = hull_vertex_abstraction(cfg, physical_wrench_vertices(cfg));
    CHECK(hull.objective == doctest::Approx(box.objective).epsilon(1e-6));
  }
}

TEST_CASE("approximation error") {
  const MarsConfig sq = grid(2, 2);
  CHECK(approximation_error(unequal_arm_abstraction(sq), sq).mean_abs < 1e-7);

  // Direct ratio from the per-rotor oracle at full thrust.
  const MarsConfig cfg = l3();
  const UnequalArmAbstraction a = unequal_arm_abstraction(cfg);
  const Eigen::VectorXd fmax = rotor_force_upper(cfg);
  const TorqueSums t = torque_sums_oracle(cfg, 0.0, &fmax);
  const double fv = fmax.sum() / 4.0;
  const auto& p = a.virtual_rotors;
  const double vx_pos = (-p[1].y() - p[2].y()) * fv;
  const double vx_neg = (-p[0].y() - p[3].y()) * fv;
  const double vy_pos = (p[0].x() + p[2].x()) * fv;
  const double vy_neg = (p[1].x() + p[3].x()) * fv;
  const double expected = (std::abs(vx_pos / t.x_pos - 1) + std::abs(vx_neg / t.x_neg - 1) +
                           std::abs(vy_pos / t.y_pos - 1) + std::abs(vy_neg / t.y_neg - 1)) /
                          4.0;
  const ApproximationReport r = approximation_error(a, cfg);
  CHECK(r.mean_abs == doctest::Approx(expected).epsilon(1e-9));
  CHECK(r.mean_abs > 1e-3);
}

TEST_CASE("mirror image gives the same objective") {
  for (const auto& [name, cfg] : six_configs()) {
    CAPTURE(name);
    const double a = unequal_arm_abstraction(cfg).objective;
    const double b = unequal_arm_abstraction(mirror_x(cfg)).objective;
    CHECK(std::abs(a - b) < 1e-7 * std::max(1.0, a));
  }
}

TEST_CASE("objective grows with the thrust limit") {
  for (const auto& [name, cfg] : six_configs()) {
    CAPTURE(name);
    MarsConfig big = cfg;
    for (auto& u : big.units)
      for (auto& r : u.rotors) r.f_max *= 1.2;
    CHECK(unequal_arm_abstraction(big).objective >= unequal_arm_abstraction(cfg).objective - 1e-9);
  }
}
