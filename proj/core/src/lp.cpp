#include "mars/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mars::lp {
namespace {

enum class VarState : unsigned char { kBasic, kLower, kUpper };

constexpr double kPivotTol = 1e-11;
constexpr int kDegenerateRunBeforeBland = 50;

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const Options& opt) : opt_(opt) {
    m_ = lp.A.rows();
    n_ = lp.A.cols();
    if (lp.b.size() != m_ || lp.c.size() != n_ || lp.lower.size() != n_ || lp.upper.size() != n_) {
      throw std::invalid_argument("lp::solve: inconsistent dimensions");
    }
    if (!lp.lower.allFinite()) throw std::invalid_argument("lp::solve: lower bounds must be finite");

    lower_ = lp.lower;
    cost_ = lp.c;
    ub_.resize(n_ + m_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const double width = lp.upper[j] - lp.lower[j];
      if (width < -opt_.feasibility_tol) throw std::invalid_argument("lp::solve: lower > upper");
      ub_[j] = std::max(width, 0.0);
    }
    for (Eigen::Index i = 0; i < m_; ++i) ub_[n_ + i] = kInfinity;

    rhs_ = lp.b - lp.A * lp.lower;
    original_.resize(m_, n_ + m_);
    original_.leftCols(n_) = lp.A;
    original_.rightCols(m_).setIdentity();
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (rhs_[i] < 0.0) {
        rhs_[i] = -rhs_[i];
        original_.row(i).head(n_) *= -1.0;
      }
    }
    t_ = original_;
    beta_ = rhs_;
    state_.assign(static_cast<std::size_t>(n_ + m_), VarState::kLower);
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) {
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      state_[static_cast<std::size_t>(n_ + i)] = VarState::kBasic;
    }
  }

  Result run() {
    Result res;
    // Phase 1: drive the artificials to zero.
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_ + m_);
    phase1.tail(m_).setOnes();
    Status s = iterate(phase1, res.iterations);
    if (s == Status::kIterationLimit) {
      res.status = s;
      return res;
    }
    double infeas = 0.0;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index v = basis_[static_cast<std::size_t>(i)];
      if (v >= n_) {
        infeas += beta_[i];
        if (beta_[i] > worst) {
          worst = beta_[i];
          res.worst_row = v - n_;
        }
      }
    }
    res.infeasibility = infeas;
    const double scale = 1.0 + rhs_.cwiseAbs().maxCoeff();
    if (infeas > opt_.feasibility_tol * scale * std::max<double>(1.0, static_cast<double>(m_))) {
      res.status = Status::kInfeasible;
      res.x = current_x();
      return res;
    }
    res.worst_row = -1;

    for (Eigen::Index i = 0; i < m_; ++i) ub_[n_ + i] = 0.0;
    if (!opt_.feasibility_only) {
      Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n_ + m_);
      phase2.head(n_) = cost_;
      s = iterate(phase2, res.iterations);
      if (s != Status::kOptimal) {
        res.status = s;
        res.x = current_x();
        return res;
      }
    }
    refine();
    res.status = Status::kOptimal;
    res.x = current_x();
    res.objective = cost_.dot(res.x);
    return res;
  }

 private:
  double value_of_nonbasic(Eigen::Index j) const {
    return state_[static_cast<std::size_t>(j)] == VarState::kUpper ? ub_[j] : 0.0;
  }

  Eigen::VectorXd current_x() const {
    Eigen::VectorXd y(n_ + m_);
    for (Eigen::Index j = 0; j < n_ + m_; ++j) y[j] = value_of_nonbasic(j);
    for (Eigen::Index i = 0; i < m_; ++i) y[basis_[static_cast<std::size_t>(i)]] = beta_[i];
    Eigen::VectorXd x = lower_ + y.head(n_);
    return x;
  }

  // Recomputes basic values from the original columns to shed accumulated drift.
  void refine() {
    if (m_ == 0) return;
    Eigen::MatrixXd basis_matrix(m_, m_);
    Eigen::VectorXd r = rhs_;
    for (Eigen::Index j = 0; j < n_ + m_; ++j) {
      if (state_[static_cast<std::size_t>(j)] == VarState::kUpper) r -= original_.col(j) * ub_[j];
    }
    for (Eigen::Index i = 0; i < m_; ++i) basis_matrix.col(i) = original_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    Eigen::VectorXd refined = lu.solve(r);
    if (refined.allFinite() && (basis_matrix * refined - r).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + r.cwiseAbs().maxCoeff())) {
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double ubi = ub_[basis_[static_cast<std::size_t>(i)]];
        beta_[i] = std::clamp(refined[i], 0.0, ubi);
      }
    }
  }

  Status iterate(const Eigen::VectorXd& cost, int& iterations) {
    const Eigen::Index total = n_ + m_;
    Eigen::VectorXd cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[basis_[static_cast<std::size_t>(i)]];
    Eigen::VectorXd d = cost;
    if (m_ > 0) d.noalias() -= t_.transpose() * cb;

    int degenerate_run = 0;
    while (true) {
      if (iterations >= opt_.max_iterations) return Status::kIterationLimit;
      const bool bland = degenerate_run >= kDegenerateRunBeforeBland;

      // Pricing.
      Eigen::Index q = -1;
      double best = 0.0;
      for (Eigen::Index j = 0; j < total; ++j) {
        const VarState st = state_[static_cast<std::size_t>(j)];
        if (st == VarState::kBasic || ub_[j] <= 0.0) continue;
        double score = 0.0;
        if (st == VarState::kLower && d[j] < -opt_.optimality_tol) score = -d[j];
        if (st == VarState::kUpper && d[j] > opt_.optimality_tol) score = d[j];
        if (score <= 0.0) continue;
        if (bland) {
          q = j;
          break;
        }
        if (score > best) {
          best = score;
          q = j;
        }
      }
      if (q < 0) return Status::kOptimal;

      const double sigma = state_[static_cast<std::size_t>(q)] == VarState::kLower ? 1.0 : -1.0;

      // Ratio test.
      double t_max = ub_[q];
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      double leave_pivot = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double rate = -sigma * t_(i, q);
        double limit = kInfinity;
        bool to_upper = false;
        if (rate < -kPivotTol) {
          limit = std::max(beta_[i], 0.0) / -rate;
        } else if (rate > kPivotTol) {
          const double ubi = ub_[basis_[static_cast<std::size_t>(i)]];
          if (ubi == kInfinity) continue;
          limit = std::max(ubi - beta_[i], 0.0) / rate;
          to_upper = true;
        } else {
          continue;
        }
        const double tie = 1e-12 * (1.0 + std::abs(limit));
        bool take = false;
        if (leave < 0) {
          take = limit <= t_max;
        } else if (limit < t_max - tie) {
          take = true;
        } else if (std::abs(limit - t_max) <= tie) {
          if (bland) {
            take = basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)];
          } else {
            take = std::abs(t_(i, q)) > std::abs(leave_pivot);
          }
        }
        if (take) {
          t_max = std::min(limit, t_max);
          leave = i;
          leave_to_upper = to_upper;
          leave_pivot = t_(i, q);
        }
      }

      if (t_max == kInfinity) return Status::kUnbounded;
      ++iterations;
      degenerate_run = (t_max <= 1e-12) ? degenerate_run + 1 : 0;

      // Move basic variables.
      for (Eigen::Index i = 0; i < m_; ++i) beta_[i] += -sigma * t_(i, q) * t_max;

      if (leave < 0) {
        // Bound flip of the entering variable; basis unchanged.
        state_[static_cast<std::size_t>(q)] =
            sigma > 0 ? VarState::kUpper : VarState::kLower;
        continue;
      }

      const Eigen::Index out = basis_[static_cast<std::size_t>(leave)];
      const double entering_value = sigma > 0 ? t_max : ub_[q] - t_max;
      state_[static_cast<std::size_t>(out)] = leave_to_upper ? VarState::kUpper : VarState::kLower;
      state_[static_cast<std::size_t>(q)] = VarState::kBasic;
      basis_[static_cast<std::size_t>(leave)] = q;
      beta_[leave] = entering_value;

      const double piv = t_(leave, q);
      t_.row(leave) /= piv;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (i == leave) continue;
        const double f = t_(i, q);
        if (f != 0.0) t_.row(i) -= f * t_.row(leave);
      }
      const double dq = d[q];
      if (dq != 0.0) d -= dq * t_.row(leave).transpose();
      d[q] = 0.0;
    }
  }

  Options opt_;
  Eigen::Index m_ = 0;
  Eigen::Index n_ = 0;
  Eigen::VectorXd lower_;
  Eigen::VectorXd cost_;
  Eigen::VectorXd ub_;
  Eigen::VectorXd rhs_;
  Eigen::MatrixXd original_;
  Eigen::MatrixXd t_;
  Eigen::VectorXd beta_;
  std::vector<VarState> state_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

const char* to_string(Status s) noexcept {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

Result solve(const LinearProgram& program, const Options& options) {
  Tableau tableau(program, options);
  return tableau.run();
}

}  // namespace mars::lp
