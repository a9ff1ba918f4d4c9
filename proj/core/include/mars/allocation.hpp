#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mars/dynamics.hpp"
#include "mars/geometry.hpp"
#include "mars/qp.hpp"

namespace mars {

struct AllocationDiagnostics {
  Vec4 residual = Vec4::Zero();  // G_M f - u
  double variance = 0.0;         // N^2
  int iterations = 0;
  bool feasible = true;
  double torque_scale = 1.0;  // beta applied to the torque when infeasible
};

struct Allocation {
  Eigen::VectorXd f;  // unit-major rotor forces
  AllocationDiagnostics diagnostics;
};

/// Minimum-variance rotor forces realising a wrench under per-rotor bounds.
/// Keeps the previous active set as a warm start.
class Allocator {
 public:
  Allocator(Eigen::MatrixXd g_mars, Eigen::VectorXd lower, Eigen::VectorXd upper);
  explicit Allocator(const MarsConfig& config);

  /// Wrenches outside the feasible polytope keep their thrust and have the torque
  /// scaled by the largest feasible beta in [0, 1]; `feasible` is then false.
  Allocation allocate(const WrenchCommand& u);

  void reset() { working_set_.clear(); }
  const Eigen::MatrixXd& effectiveness() const noexcept { return problem_.A; }

 private:
  Allocation solve(const Vec4& target, const Vec4& requested, bool feasible, double beta);
  bool reachable(const Vec4& u) const;

  qp::Problem problem_;
  qp::WorkingSet working_set_;
};

/// Cold-start allocation.
Allocation allocate(const WrenchCommand& u, const Eigen::MatrixXd& g_mars, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper);

/// Population variance (1 / 4n normalisation).
double force_variance(const Eigen::VectorXd& f);

/// Per-unit thrust and torque about each unit's own centroid. `config` must be
/// expressed in the frame the forces were allocated in.
std::vector<WrenchCommand> per_unit_commands(const Eigen::VectorXd& f, const MarsConfig& config);

/// Net wrench about `about` of per-unit commands.
WrenchCommand recompose(const std::vector<WrenchCommand>& commands, const MarsConfig& config, const Vec3& about);

}  // namespace mars
