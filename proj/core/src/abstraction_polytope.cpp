#include "mars/abstraction_polytope.hpp"

#include <cmath>
#include <string>

#include "mars/errors.hpp"
#include "mars/lp.hpp"
#include "mars/qp.hpp"

namespace mars {
namespace {

constexpr int kMaxReducedUnits = 12;
constexpr int kMaxFullVertexUnits = 4;
constexpr std::array<double, 4> kSignX{+1.0, -1.0, +1.0, -1.0};
constexpr std::array<double, 4> kSignY{+1.0, -1.0, -1.0, +1.0};

const char* component_name(int c) {
  switch (c) {
    case 0: return "thrust";
    case 1: return "roll torque";
    default: return "pitch torque";
  }
}

struct BlockSpec {
  Eigen::MatrixXd wrench;  // 3 x K: (thrust, roll, pitch) produced per unit of block variable
  Eigen::VectorXd lower;   // K
  Eigen::VectorXd upper;   // K
  bool stochastic = false; // adds sum(z) = 1 per vertex
};

struct ArmSolution {
  VirtualRotors rotors{};
  Eigen::MatrixXd blocks;  // K x 16
  double objective = 0.0;
};

// Maximises the total arm length subject to every virtual vertex wrench being
// reproduced by a block variable z_s: wrench * z_s = G_V V_V[:, s] on the first three rows.
ArmSolution solve_arm_lp(const BlockSpec& block, double f_sum_min, double f_sum_max) {
  const Eigen::Index k = block.wrench.cols();
  const Eigen::Index rows_per = block.stochastic ? 4 : 3;
  const Eigen::Index nvar = 8 + 16 * k;
  const Eigen::Index nrow = 16 * rows_per;
  const Eigen::Matrix<double, 4, 16> vv = virtual_vertex_matrix(f_sum_min, f_sum_max);

  lp::LinearProgram prog;
  prog.A = Eigen::MatrixXd::Zero(nrow, nvar);
  prog.b = Eigen::VectorXd::Zero(nrow);
  prog.c = Eigen::VectorXd::Zero(nvar);
  prog.lower = Eigen::VectorXd::Zero(nvar);
  prog.upper = Eigen::VectorXd::Constant(nvar, lp::kInfinity);
  // Variables 0..3: x magnitudes u_j; 4..7: y magnitudes w_j.
  prog.c.head(8).setConstant(-f_sum_max / 4.0);

  for (int s = 0; s < 16; ++s) {
    const Eigen::Index r0 = s * rows_per;
    const Eigen::Index z0 = 8 + s * k;
    prog.A.block(r0, z0, 3, k) = block.wrench;
    prog.lower.segment(z0, k) = block.lower;
    prog.upper.segment(z0, k) = block.upper;
    prog.b[r0] = vv.col(s).sum();
    for (int j = 0; j < 4; ++j) {
      const double f = vv(j, s);
      prog.A(r0 + 1, 4 + j) = kSignY[static_cast<std::size_t>(j)] * f;   // -(-sy w f) moved left
      prog.A(r0 + 2, j) = -kSignX[static_cast<std::size_t>(j)] * f;
    }
    if (block.stochastic) {
      prog.A.block(r0 + 3, z0, 1, k).setOnes();
      prog.b[r0 + 3] = 1.0;
    }
  }

  lp::Options opt;
  opt.feasibility_tol = 1e-9;
  const lp::Result res = lp::solve(prog, opt);
  if (res.status == lp::Status::kInfeasible) {
    const int comp = res.worst_row >= 0 ? static_cast<int>(res.worst_row % rows_per) : 0;
    const int c = comp > 2 ? 0 : comp;
    throw InfeasibleAbstraction(c, std::string("containment program infeasible in the ") + component_name(c) +
                                       " component");
  }
  if (res.status != lp::Status::kOptimal) {
    throw Error(std::string("containment program failed: ") + lp::to_string(res.status));
  }

  // The LP optimum is often a face rather than a point. Among optimal layouts pick the
  // one with the smallest sum of squared arms; it is unique and respects mirror symmetry.
  Eigen::VectorXd x = res.x;
  {
    qp::Problem tie;
    tie.diagonal_h = true;
    tie.H = Eigen::VectorXd::Constant(nvar, 1e-4);
    tie.H.topRows(8).setOnes();
    tie.g = Eigen::VectorXd::Zero(nvar);
    tie.A.resize(nrow + 1, nvar);
    tie.A.topRows(nrow) = prog.A;
    tie.A.row(nrow).setZero();
    tie.A.row(nrow).head(8).setOnes();
    tie.b.resize(nrow + 1);
    tie.b.head(nrow) = prog.b;
    tie.b[nrow] = x.head(8).sum();
    tie.lo = prog.lower;
    tie.hi = prog.upper;
    const qp::Result q = qp::solve_from(tie, x);
    if (q.status == qp::Status::kOptimal &&
        (tie.A * q.x - tie.b).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + tie.b.lpNorm<Eigen::Infinity>())) {
      x = q.x;
    }
  }

  ArmSolution out;
  for (int j = 0; j < 4; ++j) {
    out.rotors[static_cast<std::size_t>(j)] =
        Vec2(kSignX[static_cast<std::size_t>(j)] * x[j], kSignY[static_cast<std::size_t>(j)] * x[4 + j]);
  }
  out.blocks.resize(k, 16);
  for (int s = 0; s < 16; ++s) out.blocks.col(s) = x.segment(8 + s * k, k);
  out.objective = -res.objective;
  return out;
}

UnequalArmAbstraction finish(const MarsConfig& config, ContainmentModel model, const ArmSolution& sol) {
  UnequalArmAbstraction a;
  a.model = model;
  a.centroid = centroid(config);
  a.virtual_rotors = sol.rotors;
  a.c_vz = yaw_torque_coefficient(config, rotor_force_upper(config));
  a.effectiveness = effectiveness_from_rotors(a.virtual_rotors, a.c_vz);
  a.mass = total_mass(config);
  a.inertia = composite_inertia(config, a.centroid);
  a.f_sum_min = rotor_force_lower(config).sum();
  a.f_sum_max = rotor_force_upper(config).sum();
  a.objective = sol.objective;
  return a;
}

}  // namespace

Eigen::MatrixXd mars_effectiveness(const MarsConfig& config) {
  const Vec3 pv = centroid(config);
  Eigen::MatrixXd g(4, static_cast<Eigen::Index>(config.rotor_count()));
  Eigen::Index k = 0;
  for (const UnitSpec& u : config.units) {
    for (int j = 0; j < 4; ++j) {
      const RotorSpec& r = u.rotors[static_cast<std::size_t>(j)];
      const Vec3 d = rotor_position(u, j) - pv;
      g.col(k++) << 1.0, -d.y(), d.x(), r.spin_sign * r.c_z;
    }
  }
  return g;
}

WrenchVertexSet reduced_vertex_set(const MarsConfig& config) {
  const auto n = static_cast<int>(config.unit_count());
  if (n > kMaxReducedUnits) {
    throw TooManyUnits("the unit-vertex set is limited to " + std::to_string(kMaxReducedUnits) + " units");
  }
  const Vec3 pv = centroid(config);
  WrenchVertexSet set;
  set.g_mars = Eigen::MatrixXd::Zero(4, n);
  Eigen::VectorXd lo(n);
  Eigen::VectorXd hi(n);
  for (int i = 0; i < n; ++i) {
    const UnitSpec& u = config.units[static_cast<std::size_t>(i)];
    const Vec3 d = u.position - pv;
    set.g_mars.col(i) << 1.0, -d.y(), d.x(), 0.0;
    lo[i] = 0.0;
    hi[i] = 0.0;
    for (const RotorSpec& r : u.rotors) {
      lo[i] += r.f_min;
      hi[i] += r.f_max;
    }
  }
  const Eigen::Index cols = Eigen::Index{1} << n;
  set.vertices.resize(n, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (int i = 0; i < n; ++i) set.vertices(i, c) = ((c >> i) & 1) != 0 ? hi[i] : lo[i];
  }
  set.f_sum_min = lo.sum();
  set.f_sum_max = hi.sum();
  return set;
}

Eigen::Matrix<double, 4, 16> virtual_vertex_matrix(double f_sum_min, double f_sum_max) {
  Eigen::Matrix<double, 4, 16> v;
  for (int s = 0; s < 16; ++s) {
    for (int j = 0; j < 4; ++j) v(j, s) = ((s >> j) & 1) != 0 ? f_sum_max / 4.0 : f_sum_min / 4.0;
  }
  return v;
}

Eigen::Matrix3Xd physical_wrench_vertices(const MarsConfig& config) {
  const auto n = static_cast<int>(config.unit_count());
  if (n > kMaxFullVertexUnits) {
    throw TooManyUnits("full rotor-vertex enumeration is limited to " + std::to_string(kMaxFullVertexUnits) +
                       " units");
  }
  const Eigen::MatrixXd g = mars_effectiveness(config).topRows(3);
  const Eigen::VectorXd lo = rotor_force_lower(config);
  const Eigen::VectorXd hi = rotor_force_upper(config);
  const int m = 4 * n;
  const Eigen::Index count = Eigen::Index{1} << m;
  Eigen::Matrix3Xd w(3, count);
  Eigen::VectorXd f(m);
  for (Eigen::Index c = 0; c < count; ++c) {
    for (int k = 0; k < m; ++k) f[k] = ((c >> k) & 1) != 0 ? hi[k] : lo[k];
    w.col(c) = g * f;
  }
  return w;
}

UnequalArmAbstraction unequal_arm_abstraction(const MarsConfig& config, ContainmentModel model) {
  if (config.unit_count() > static_cast<std::size_t>(kMaxReducedUnits)) {
    throw TooManyUnits("unequal-arm abstraction is limited to " + std::to_string(kMaxReducedUnits) + " units");
  }
  const double f_min = rotor_force_lower(config).sum();
  const double f_max = rotor_force_upper(config).sum();
  BlockSpec block;
  if (model == ContainmentModel::kRotorBox) {
    block.wrench = mars_effectiveness(config).topRows(3);
    block.lower = rotor_force_lower(config);
    block.upper = rotor_force_upper(config);
    const ArmSolution sol = solve_arm_lp(block, f_min, f_max);
    UnequalArmAbstraction a = finish(config, model, sol);
    a.vertex_realizations = sol.blocks;
    return a;
  }
  const WrenchVertexSet set = reduced_vertex_set(config);
  block.wrench = (set.g_mars * set.vertices).topRows(3);
  block.lower = Eigen::VectorXd::Zero(set.vertices.cols());
  block.upper = Eigen::VectorXd::Constant(set.vertices.cols(), lp::kInfinity);
  block.stochastic = true;
  const ArmSolution sol = solve_arm_lp(block, f_min, f_max);
  UnequalArmAbstraction a = finish(config, model, sol);
  a.containment_weights = sol.blocks;
  return a;
}

UnequalArmAbstraction hull_vertex_abstraction(const MarsConfig& config, const Eigen::Matrix3Xd& wrench_vertices) {
  BlockSpec block;
  block.wrench = wrench_vertices;
  block.lower = Eigen::VectorXd::Zero(wrench_vertices.cols());
  block.upper = Eigen::VectorXd::Constant(wrench_vertices.cols(), lp::kInfinity);
  block.stochastic = true;
  const ArmSolution sol =
      solve_arm_lp(block, rotor_force_lower(config).sum(), rotor_force_upper(config).sum());
  UnequalArmAbstraction a = finish(config, ContainmentModel::kReducedUnitVertex, sol);
  a.containment_weights = sol.blocks;
  return a;
}

ApproximationReport approximation_error(const UnequalArmAbstraction& abstraction, const MarsConfig& config) {
  const Eigen::VectorXd fmax = rotor_force_upper(config);
  const GroupedTorques phys = grouped_torques(config, 0.0, &fmax);
  const VirtualRotors& p = abstraction.virtual_rotors;
  const double fv = fmax.sum() / 4.0;
  const std::array<double, 4> virt{(-p[1].y() - p[2].y()) * fv, (-p[0].y() - p[3].y()) * fv,
                                   (p[0].x() + p[2].x()) * fv, (p[1].x() + p[3].x()) * fv};
  const std::array<double, 4> actual{phys.x_pos, phys.x_neg, phys.y_pos, phys.y_neg};
  ApproximationReport r;
  double sum = 0.0;
  int used = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (actual[k] == 0.0) {
      r.defined[k] = false;
      r.per_axis[k] = 0.0;
      continue;
    }
    r.per_axis[k] = (virt[k] - actual[k]) / actual[k];
    sum += std::abs(r.per_axis[k]);
    ++used;
  }
  r.mean_abs = used > 0 ? sum / used : 0.0;
  return r;
}

}  // namespace mars
