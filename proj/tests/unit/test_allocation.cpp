#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "mars/abstraction_polytope.hpp"
#include "mars/allocation.hpp"

using namespace mars;
using namespace mars::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Stationarity of min 0.5 |f|^2 s.t. G f = u, lo <= f <= hi: f - G' nu is zero on
// free entries, >= 0 at the lower bound and <= 0 at the upper bound.
double kkt_violation(const MatrixXd& g, const VectorXd& lo, const VectorXd& hi, const VectorXd& f) {
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    if (f[i] > lo[i] + 1e-9 && f[i] < hi[i] - 1e-9) free.push_back(i);
  MatrixXd gf(4, static_cast<Eigen::Index>(free.size()));
  VectorXd ff(static_cast<Eigen::Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) {
    gf.col(static_cast<Eigen::Index>(k)) = g.col(free[k]);
    ff[static_cast<Eigen::Index>(k)] = f[free[k]];
  }
  const VectorXd nu = gf.transpose().completeOrthogonalDecomposition().solve(ff);
  const VectorXd r = f - g.transpose() * nu;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (f[i] <= lo[i] + 1e-9) worst = std::max(worst, -r[i]);
    else if (f[i] >= hi[i] - 1e-9) worst = std::max(worst, r[i]);
    else worst = std::max(worst, std::abs(r[i]));
  }
  return worst;
}

WrenchCommand random_feasible(const MatrixXd& g, const VectorXd& lo, const VectorXd& hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const VectorXd f = lo + (hi - lo).cwiseProduct(VectorXd::NullaryExpr(lo.size(), [&] { return u(rng); }));
  return WrenchCommand::from_vector(g * f);
}

}  // namespace

TEST_CASE("symmetric hover splits evenly") {
  const MarsConfig cfg = grid(2, 1);
  Allocator a(cfg);
  const Allocation r = a.allocate(WrenchCommand{3.0 * 9.81, Vec3::Zero()});
  CHECK(r.diagnostics.feasible);
  CHECK((r.f - VectorXd::Constant(8, 3.0 * 9.81 / 8)).norm() < 1e-9);
  CHECK(r.diagnostics.variance < 1e-18);
  CHECK(r.diagnostics.residual.norm() < 1e-10);
}

TEST_CASE("pure yaw on one unit") {
  const MarsConfig cfg = grid(1, 1);
  const double F = 14.715;
  const double tau = 0.02;
  const Allocation r = allocate(WrenchCommand{F, Vec3(0, 0, tau)}, mars_effectiveness(cfg), rotor_force_lower(cfg),
                                rotor_force_upper(cfg));
  const double d = tau / (4 * 0.016);
  CHECK(r.f[0] == doctest::Approx(F / 4 - d));
  CHECK(r.f[1] == doctest::Approx(F / 4 - d));
  CHECK(r.f[2] == doctest::Approx(F / 4 + d));
  CHECK(r.f[3] == doctest::Approx(F / 4 + d));
}

TEST_CASE("unreachable wrenches are flagged") {
  Allocator a(grid(2, 1));
  const Allocation thrust = a.allocate(WrenchCommand{100.0, Vec3::Zero()});
  CHECK_FALSE(thrust.diagnostics.feasible);
  CHECK((thrust.f.array() <= 7.0 + 1e-9).all());

  const Allocation torque = a.allocate(WrenchCommand{29.43, Vec3(0, 0, 2.0)});
  CHECK_FALSE(torque.diagnostics.feasible);
  CHECK(torque.diagnostics.torque_scale >= 0.0);
  CHECK(torque.diagnostics.torque_scale < 1.0);
  CHECK(std::abs(torque.diagnostics.residual[0]) < 1e-8);
  CHECK((torque.f.array() >= -1e-9).all());
  CHECK((torque.f.array() <= 7.0 + 1e-9).all());
}

TEST_CASE("variance is minimal among feasible alternatives") {
  const MarsConfig cfg = grid(2, 1);
  const MatrixXd g = mars_effectiveness(cfg);
  const VectorXd lo = rotor_force_lower(cfg), hi = rotor_force_upper(cfg);
  const MatrixXd null = g.fullPivLu().kernel();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Allocator a(cfg);
  for (int t = 0; t < 20; ++t) {
    const WrenchCommand u = random_feasible(g, lo, hi, rng);
    const Allocation r = a.allocate(u);
    REQUIRE(r.diagnostics.feasible);
    CHECK(r.diagnostics.residual.norm() < 1e-8);
    CHECK(kkt_violation(g, lo, hi, r.f) < 1e-8);
    for (int k = 0; k < 200; ++k) {
      const VectorXd alt = r.f + 0.05 * null * VectorXd::NullaryExpr(null.cols(), [&] { return n(rng); });
      if ((alt - lo).minCoeff() < 0 || (hi - alt).minCoeff() < 0) continue;
      CHECK(force_variance(alt) >= r.diagnostics.variance - 1e-12);
    }
  }
}

TEST_CASE("reordering units permutes the forces") {
  const MarsConfig cfg = l3();
  MarsConfig rev = cfg;
  std::reverse(rev.units.begin(), rev.units.end());
  std::mt19937_64 rng(8);
  const MatrixXd g = mars_effectiveness(cfg);
  for (int t = 0; t < 10; ++t) {
    const WrenchCommand u = random_feasible(g, rotor_force_lower(cfg), rotor_force_upper(cfg), rng);
    const VectorXd a = Allocator(cfg).allocate(u).f;
    const VectorXd b = Allocator(rev).allocate(u).f;
    for (int i = 0; i < 3; ++i) CHECK((a.segment<4>(4 * i) - b.segment<4>(4 * (2 - i))).norm() < 1e-9);
  }
}

TEST_CASE("forces vary continuously along a smooth command path") {
  const MarsConfig cfg = grid(2, 2);
  Allocator a(cfg);
  VectorXd prev;
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double s = 2.0 * M_PI * k / 500.0;
    const WrenchCommand u{6.0 * 9.81, Vec3(2.0 * std::sin(s), 2.0 * std::cos(3 * s), 0.3 * std::sin(2 * s))};
    const Allocation r = a.allocate(u);
    if (k > 0) worst = std::max(worst, (r.f - prev).lpNorm<Eigen::Infinity>());
    prev = r.f;
  }
  CHECK(worst < 1e-2 * 7.0);
}

TEST_CASE("per-unit commands recompose to the allocated wrench") {
  const MarsConfig two = grid(2, 1);
  const Allocation hover = Allocator(two).allocate(WrenchCommand{29.43, Vec3::Zero()});
  for (const WrenchCommand& c : per_unit_commands(hover.f, two)) {
    CHECK(c.F == doctest::Approx(14.715));
    CHECK(c.M.norm() < 1e-12);
  }

  const MarsConfig one = grid(1, 1);
  const WrenchCommand w{15.0, Vec3(0.1, -0.2, 0.01)};
  const Allocation r1 = Allocator(one).allocate(w);
  const auto c1 = per_unit_commands(r1.f, one);
  CHECK((c1[0].to_vector() - w.to_vector()).norm() < 1e-10);

  const MarsConfig l = l3();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 7.0);
  const VectorXd f = VectorXd::NullaryExpr(12, [&] { return u(rng); });
  const WrenchCommand back = recompose(per_unit_commands(f, l), l, centroid(l));
  CHECK((back.to_vector() - mars_effectiveness(l) * f).norm() < 1e-12);
}

TEST_CASE("allocator input checks") {
  MatrixXd g = MatrixXd::Zero(4, 4);
  g.row(0).setOnes();
  CHECK_THROWS_AS(Allocator(g, VectorXd::Zero(4), VectorXd::Ones(4)), std::invalid_argument);
  CHECK(force_variance(Eigen::Vector4d(1, 2, 3, 4)) == doctest::Approx(1.25));
}
