#pragma once

#include <limits>

#include <Eigen/Dense>

namespace mars::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// minimize c'x  subject to  A x = b,  lower <= x <= upper.
/// Every lower bound must be finite; upper bounds may be +infinity.
struct LinearProgram {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* to_string(Status s) noexcept;

struct Options {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  int max_iterations = 200000;
  /// Only run phase 1; the result is any feasible point.
  bool feasibility_only = false;
};

struct Result {
  Status status = Status::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  /// Row with the largest remaining artificial value when infeasible, else -1.
  Eigen::Index worst_row = -1;
  double infeasibility = 0.0;
};

/// Dense bounded-variable primal simplex (two phases, artificial start basis).
/// Pricing is Dantzig with lowest-index tie-breaking; after a run of degenerate
/// pivots it switches to Bland's rule, which keeps it finite and deterministic.
Result solve(const LinearProgram& program, const Options& options = {});

}  // namespace mars::lp
