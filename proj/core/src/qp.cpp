#include "mars/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mars/lp.hpp"

namespace mars::qp {
namespace {

class ActiveSetSolver {
 public:
  ActiveSetSolver(const Problem& p, const Options& opt) : p_(p), opt_(opt) {
    n_ = p.g.size();
    m_ = p.A.rows();
    if (p.lo.size() != n_ || p.hi.size() != n_ || (m_ > 0 && p.A.cols() != n_) || p.b.size() != m_) {
      throw std::invalid_argument("qp::solve: inconsistent dimensions");
    }
    if (!p.diagonal_h && (p.H.rows() != n_ || p.H.cols() != n_)) {
      throw std::invalid_argument("qp::solve: H has the wrong shape");
    }
    if (p.diagonal_h && p.H.rows() != n_) throw std::invalid_argument("qp::solve: H has the wrong shape");
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (p.lo[i] > p.hi[i]) throw std::invalid_argument("qp::solve: lo > hi");
    }
    if (m_ > 0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(p.A);
      lu.setThreshold(1e-10);
      rank_a_ = lu.rank();
    }
    max_iter_ = opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(50 * n_ + 50);
  }

  Result run(const WorkingSet* warm, const Eigen::VectorXd* start) {
    Result res;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    WorkingSet w(static_cast<std::size_t>(n_), 0);
    bool started = false;

    if (start != nullptr) {
      if (start->size() != n_) throw std::invalid_argument("qp::solve_from: start has the wrong size");
      x = start->cwiseMax(p_.lo).cwiseMin(p_.hi);
      mark_bounds(x, w);
      complete_rank(w);
      started = true;
    }

    if (!started && warm != nullptr && static_cast<Eigen::Index>(warm->size()) == n_) {
      w = *warm;
      sanitize(w);
      complete_rank(w);
      place_on_bounds(x, w);
      started = try_start(x, w);
    }
    if (!started) {
      std::fill(w.begin(), w.end(), 0);
      x.setZero();
      started = try_start(x, w);
    }
    if (!started && m_ == 0) {
      Eigen::VectorXd lambda;
      Eigen::VectorXd step = eqp(x, w, lambda);
      x = (x + step).cwiseMax(p_.lo).cwiseMin(p_.hi);
      mark_bounds(x, w);
      started = true;
    }
    if (!started) {
      lp::LinearProgram prog;
      prog.A = p_.A;
      prog.b = p_.b;
      prog.c = Eigen::VectorXd::Zero(n_);
      prog.lower = p_.lo;
      prog.upper = p_.hi;
      if (!prog.lower.allFinite()) throw std::invalid_argument("qp::solve: phase 1 needs finite lower bounds");
      lp::Options lo;
      lo.feasibility_only = true;
      const lp::Result lr = lp::solve(prog, lo);
      if (lr.status != lp::Status::kOptimal) {
        res.status = Status::kInfeasible;
        res.x = lr.x.size() == n_ ? lr.x : x;
        res.working_set = w;
        return res;
      }
      x = lr.x.cwiseMax(p_.lo).cwiseMin(p_.hi);
      mark_bounds(x, w);
      complete_rank(w);
    }

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m_);
    int it = 0;
    int stalled = 0;  // consecutive zero-length steps
    res.status = Status::kIterationLimit;
    while (it < max_iter_) {
      ++it;
      const Eigen::VectorXd step = eqp(x, w, lambda);
      const double step_tol = 1e-9 * (1.0 + x.lpNorm<Eigen::Infinity>());
      if (step.lpNorm<Eigen::Infinity>() <= step_tol) {
        x = (x + step).cwiseMax(p_.lo).cwiseMin(p_.hi);
        const Eigen::VectorXd grad = gradient(x) + (m_ > 0 ? Eigen::VectorXd(p_.A.transpose() * lambda)
                                                            : Eigen::VectorXd::Zero(n_));
        const double mult_tol = opt_.tolerance * (1.0 + grad.lpNorm<Eigen::Infinity>());
        // Most negative multiplier; lowest index once progress has stalled.
        const bool bland = stalled > 8;
        Eigen::Index release = -1;
        double worst = -mult_tol;
        for (Eigen::Index i = 0; i < n_; ++i) {
          const signed char s = w[static_cast<std::size_t>(i)];
          if (s == 0 || p_.lo[i] == p_.hi[i]) continue;
          const double mu = s < 0 ? grad[i] : -grad[i];
          if (mu < worst) {
            worst = mu;
            release = i;
            if (bland) break;
          }
        }
        if (release < 0) {
          res.status = Status::kOptimal;
          break;
        }
        w[static_cast<std::size_t>(release)] = 0;
        continue;
      }

      double alpha = 1.0;
      Eigen::Index block = -1;
      signed char block_side = 0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (w[static_cast<std::size_t>(i)] != 0) continue;
        const double pi = step[i];
        double a = std::numeric_limits<double>::infinity();
        signed char side = 0;
        if (pi < 0.0 && std::isfinite(p_.lo[i])) {
          a = (p_.lo[i] - x[i]) / pi;
          side = -1;
        } else if (pi > 0.0 && std::isfinite(p_.hi[i])) {
          a = (p_.hi[i] - x[i]) / pi;
          side = 1;
        } else {
          continue;
        }
        a = std::max(a, 0.0);
        if (a < alpha) {
          alpha = a;
          block = i;
          block_side = side;
        }
      }
      stalled = alpha * step.lpNorm<Eigen::Infinity>() <= step_tol ? stalled + 1 : 0;
      x += alpha * step;
      if (block >= 0) {
        w[static_cast<std::size_t>(block)] = block_side;
        x[block] = block_side < 0 ? p_.lo[block] : p_.hi[block];
      }
    }

    for (Eigen::Index i = 0; i < n_; ++i) {
      const signed char s = w[static_cast<std::size_t>(i)];
      if (s < 0) x[i] = p_.lo[i];
      if (s > 0) x[i] = p_.hi[i];
    }
    res.iterations = it;
    res.x = x;
    res.lambda = lambda;
    res.working_set = w;
    res.objective = 0.5 * x.dot(hessian_times(x)) + p_.g.dot(x);
    return res;
  }

 private:
  Eigen::VectorXd hessian_times(const Eigen::VectorXd& x) const {
    if (p_.diagonal_h) return p_.H.col(0).head(n_).cwiseProduct(x);
    return p_.H * x;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return hessian_times(x) + p_.g; }

  void sanitize(WorkingSet& w) const {
    for (Eigen::Index i = 0; i < n_; ++i) {
      signed char& s = w[static_cast<std::size_t>(i)];
      if (s < 0 && !std::isfinite(p_.lo[i])) s = 0;
      if (s > 0 && !std::isfinite(p_.hi[i])) s = 0;
    }
  }

  void place_on_bounds(Eigen::VectorXd& x, const WorkingSet& w) const {
    for (Eigen::Index i = 0; i < n_; ++i) {
      const signed char s = w[static_cast<std::size_t>(i)];
      if (s < 0) x[i] = p_.lo[i];
      if (s > 0) x[i] = p_.hi[i];
    }
  }

  void mark_bounds(const Eigen::VectorXd& x, WorkingSet& w) const {
    for (Eigen::Index i = 0; i < n_; ++i) {
      signed char s = 0;
      if (x[i] <= p_.lo[i]) s = -1;
      else if (x[i] >= p_.hi[i]) s = 1;
      w[static_cast<std::size_t>(i)] = s;
    }
  }

  // Frees fixed variables until the free columns of A span the row space of A, so the
  // active constraints stay linearly independent.
  void complete_rank(WorkingSet& w) const {
    if (m_ == 0) return;
    Eigen::MatrixXd basis(m_, m_);
    Eigen::Index r = 0;
    auto absorb = [&](Eigen::Index col) {
      if (r >= m_) return false;
      Eigen::VectorXd v = p_.A.col(col);
      const double norm0 = v.norm();
      if (norm0 == 0.0) return false;
      for (int pass = 0; pass < 2; ++pass) v -= basis.leftCols(r) * (basis.leftCols(r).transpose() * v);
      const double norm = v.norm();
      if (norm <= 1e-10 * norm0) return false;
      basis.col(r++) = v / norm;
      return true;
    };
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (w[static_cast<std::size_t>(i)] == 0) absorb(i);
    }
    for (Eigen::Index i = 0; i < n_ && r < rank_a_; ++i) {
      if (w[static_cast<std::size_t>(i)] != 0 && absorb(i)) w[static_cast<std::size_t>(i)] = 0;
    }
  }

  bool try_start(Eigen::VectorXd& x, const WorkingSet& w) const {
    Eigen::VectorXd lambda;
    const Eigen::VectorXd step = eqp(x, w, lambda, true);
    const Eigen::VectorXd cand = x + step;
    if (!cand.allFinite()) return false;
    const double tol = 1e-12 * (1.0 + cand.lpNorm<Eigen::Infinity>());
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (cand[i] < p_.lo[i] - tol || cand[i] > p_.hi[i] + tol) return false;
    }
    if (m_ > 0) {
      const double res = (p_.A * cand - p_.b).lpNorm<Eigen::Infinity>();
      if (res > 1e-9 * (1.0 + p_.b.lpNorm<Eigen::Infinity>())) return false;
    }
    x = cand.cwiseMax(p_.lo).cwiseMin(p_.hi);
    return true;
  }

  // Step p minimising the objective from x with the working set held fixed. With
  // `restore` the step also re-establishes A(x + p) = b.
  Eigen::VectorXd eqp(const Eigen::VectorXd& x, const WorkingSet& w, Eigen::VectorXd& lambda,
                      bool restore = false) const {
    std::vector<Eigen::Index> f;
    f.reserve(static_cast<std::size_t>(n_));
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (w[static_cast<std::size_t>(i)] == 0) f.push_back(i);
    }
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n_);
    lambda = Eigen::VectorXd::Zero(m_);
    const Eigen::VectorXd r = gradient(x);
    const auto nf = static_cast<Eigen::Index>(f.size());

    Eigen::VectorXd hinv_r(nf);
    Eigen::MatrixXd hinv_at;  // H_FF^{-1} A_F^T
    Eigen::MatrixXd af;
    if (m_ > 0) af = p_.A(Eigen::all, f);

    if (p_.diagonal_h) {
      Eigen::VectorXd hd(nf);
      for (Eigen::Index k = 0; k < nf; ++k) hd[k] = p_.H(f[static_cast<std::size_t>(k)], 0);
      for (Eigen::Index k = 0; k < nf; ++k) hinv_r[k] = r[f[static_cast<std::size_t>(k)]] / hd[k];
      if (m_ > 0) hinv_at = hd.cwiseInverse().asDiagonal() * af.transpose();
    } else if (nf > 0) {
      Eigen::LLT<Eigen::MatrixXd> llt(p_.H(f, f));
      if (llt.info() != Eigen::Success) throw std::runtime_error("qp::solve: H is not positive definite");
      hinv_r = llt.solve(r(f));
      if (m_ > 0) hinv_at = llt.solve(af.transpose());
    }

    if (m_ > 0) {
      const Eigen::VectorXd e = restore ? Eigen::VectorXd(p_.b - p_.A * x) : Eigen::VectorXd::Zero(m_);
      const Eigen::MatrixXd s = nf > 0 ? Eigen::MatrixXd(af * hinv_at) : Eigen::MatrixXd::Zero(m_, m_);
      const Eigen::VectorXd rhs = -(nf > 0 ? Eigen::VectorXd(af * hinv_r) : Eigen::VectorXd::Zero(m_)) - e;
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(s);
      cod.setThreshold(1e-12);
      lambda = cod.solve(rhs);
      if (nf > 0) {
        const Eigen::VectorXd pf = -hinv_r - hinv_at * lambda;
        for (Eigen::Index k = 0; k < nf; ++k) step[f[static_cast<std::size_t>(k)]] = pf[k];
      }
    } else {
      for (Eigen::Index k = 0; k < nf; ++k) step[f[static_cast<std::size_t>(k)]] = -hinv_r[k];
    }
    return step;
  }

  const Problem& p_;
  Options opt_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  Eigen::Index rank_a_ = 0;
  int max_iter_ = 0;
};

}  // namespace

Result solve(const Problem& problem, const WorkingSet* warm_start, const Options& options) {
  ActiveSetSolver solver(problem, options);
  return solver.run(warm_start, nullptr);
}

Result solve_from(const Problem& problem, const Eigen::VectorXd& feasible_point, const Options& options) {
  ActiveSetSolver solver(problem, options);
  return solver.run(nullptr, &feasible_point);
}

double kkt_residual(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd grad = problem.diagonal_h ? Eigen::VectorXd(problem.H.col(0).head(n).cwiseProduct(x))
                                            : Eigen::VectorXd(problem.H * x);
  grad += problem.g;
  double worst = 0.0;
  if (problem.A.rows() > 0) {
    grad += problem.A.transpose() * lambda;
    worst = (problem.A * x - problem.b).lpNorm<Eigen::Infinity>();
  }
  const double scale = 1.0 + grad.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < n; ++i) {
    worst = std::max({worst, problem.lo[i] - x[i], x[i] - problem.hi[i]});
    const double tol = 1e-12 * (1.0 + std::abs(x[i]));
    const bool at_lo = x[i] <= problem.lo[i] + tol;
    const bool at_hi = x[i] >= problem.hi[i] - tol;
    double v = 0.0;
    if (at_lo && at_hi) v = 0.0;
    else if (at_lo) v = std::max(0.0, -grad[i]);
    else if (at_hi) v = std::max(0.0, grad[i]);
    else v = std::abs(grad[i]);
    worst = std::max(worst, v / scale);
  }
  return worst;
}

}  // namespace mars::qp
