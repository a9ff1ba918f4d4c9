#include "mars/allocation.hpp"

#include <algorithm>
#include <stdexcept>

#include "mars/abstraction_polytope.hpp"
#include "mars/lp.hpp"

namespace mars {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Allocator::Allocator(MatrixXd g_mars, VectorXd lower, VectorXd upper) {
  const Eigen::Index n = g_mars.cols();
  if (g_mars.rows() != 4 || n < 4) throw std::invalid_argument("effectiveness must be 4 x 4n with n >= 1");
  if (lower.size() != n || upper.size() != n || (lower.array() > upper.array()).any())
    throw std::invalid_argument("rotor bounds must match the effectiveness columns with lower <= upper");
  Eigen::FullPivLU<MatrixXd> lu(g_mars);
  if (lu.rank() < 4) throw std::invalid_argument("effectiveness must have rank 4");
  problem_.H = VectorXd::Ones(n);
  problem_.diagonal_h = true;
  problem_.g = VectorXd::Zero(n);
  problem_.A = std::move(g_mars);
  problem_.b = VectorXd::Zero(4);
  problem_.lo = std::move(lower);
  problem_.hi = std::move(upper);
}

Allocator::Allocator(const MarsConfig& config)
    : Allocator(mars_effectiveness(config), rotor_force_lower(config), rotor_force_upper(config)) {}

bool Allocator::reachable(const Vec4& u) const {
  lp::LinearProgram prog;
  prog.A = problem_.A;
  prog.b = u;
  prog.c = VectorXd::Zero(problem_.A.cols());
  prog.lower = problem_.lo;
  prog.upper = problem_.hi;
  lp::Options opt;
  opt.feasibility_only = true;
  return lp::solve(prog, opt).status == lp::Status::kOptimal;
}

Allocation Allocator::solve(const Vec4& target, const Vec4& requested, bool feasible, double beta) {
  problem_.b = target;
  const qp::Result res = qp::solve(problem_, working_set_.empty() ? nullptr : &working_set_);
  Allocation out;
  out.diagnostics.iterations = res.iterations;
  if (res.status == qp::Status::kInfeasible) {
    out.f = VectorXd();
    out.diagnostics.feasible = false;
    return out;
  }
  working_set_ = res.working_set;
  out.f = res.x;
  out.diagnostics.residual = problem_.A * res.x - requested;
  out.diagnostics.variance = force_variance(res.x);
  out.diagnostics.feasible = feasible;
  out.diagnostics.torque_scale = beta;
  return out;
}

Allocation Allocator::allocate(const WrenchCommand& u) {
  const Vec4 req = u.to_vector();
  if (!req.allFinite()) throw std::invalid_argument("wrench command must be finite");
  Allocation out = solve(req, req, true, 1.0);
  if (out.f.size() > 0) return out;

  // Thrust priority: clamp F into range, then bisect on the torque scale.
  Vec4 base = req;
  base[0] = std::clamp(req[0], problem_.lo.sum(), problem_.hi.sum());
  auto scaled = [&](double b) {
    Vec4 v = base;
    v.tail<3>() *= b;
    return v;
  };
  double lo = 0.0;
  double hi = 1.0;
  if (reachable(scaled(1.0))) lo = 1.0;
  for (int it = 0; it < 40 && lo < hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (reachable(scaled(mid)) ? lo : hi) = mid;
  }
  working_set_.clear();
  Allocation fb = solve(scaled(lo), req, false, lo);
  fb.diagnostics.iterations += out.diagnostics.iterations;
  if (fb.f.size() == 0) throw std::runtime_error("allocation fallback failed to find a feasible point");
  return fb;
}

Allocation allocate(const WrenchCommand& u, const MatrixXd& g_mars, const VectorXd& lower, const VectorXd& upper) {
  Allocator a(g_mars, lower, upper);
  return a.allocate(u);
}

double force_variance(const VectorXd& f) {
  if (f.size() == 0) return 0.0;
  const double mean = f.mean();
  return (f.array() - mean).square().sum() / static_cast<double>(f.size());
}

std::vector<WrenchCommand> per_unit_commands(const VectorXd& f, const MarsConfig& config) {
  if (f.size() != static_cast<Eigen::Index>(config.rotor_count()))
    throw std::invalid_argument("force vector length must be 4n");
  std::vector<WrenchCommand> out;
  out.reserve(config.unit_count());
  Eigen::Index k = 0;
  for (const UnitSpec& unit : config.units) {
    WrenchCommand c;
    for (const RotorSpec& r : unit.rotors) {
      const double fk = f[k++];
      c.F += fk;
      c.M += Vec3(-r.offset.y() * fk, r.offset.x() * fk, r.spin_sign * r.c_z * fk);
    }
    out.push_back(c);
  }
  return out;
}

WrenchCommand recompose(const std::vector<WrenchCommand>& commands, const MarsConfig& config, const Vec3& about) {
  if (commands.size() != config.unit_count()) throw std::invalid_argument("one command per unit expected");
  WrenchCommand net;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const Vec3 d = config.units[i].position - about;
    const WrenchCommand& c = commands[i];
    net.F += c.F;
    net.M += c.M + Vec3(-d.y() * c.F, d.x() * c.F, 0.0);
  }
  return net;
}

}  // namespace mars
