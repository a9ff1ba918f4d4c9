#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace mars::qp {

/// minimize 0.5 x'Hx + g'x  subject to  A x = b,  lo <= x <= hi.
/// H must be positive definite. When `diagonal_h` is set, H is an n x 1 column
/// holding the diagonal.
struct Problem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;  // may have zero rows
  Eigen::VectorXd b;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  bool diagonal_h = false;
};

/// Per-variable bound status: -1 at lower, +1 at upper, 0 free.
using WorkingSet = std::vector<signed char>;

enum class Status { kOptimal, kIterationLimit, kInfeasible };

struct Options {
  double tolerance = 1e-10;
  int max_iterations = 0;  // 0 picks 50 * n + 50
};

struct Result {
  Status status = Status::kInfeasible;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // equality multipliers
  WorkingSet working_set;
  int iterations = 0;
  double objective = 0.0;
};

/// Primal active-set method. A warm-start working set is tried first by solving the
/// equality subproblem with those bounds fixed. When that point is not primal
/// feasible, the start is the unconstrained equality solution if it respects the
/// bounds, otherwise a phase-1 LP vertex.
Result solve(const Problem& problem, const WorkingSet* warm_start = nullptr,
             const Options& options = {});

/// Same method started from a point that already satisfies every constraint.
Result solve_from(const Problem& problem, const Eigen::VectorXd& feasible_point, const Options& options = {});

/// Largest violation of the first-order optimality conditions at x.
double kkt_residual(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda);

}  // namespace mars::qp
