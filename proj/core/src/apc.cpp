#include "mars/apc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mars/errors.hpp"

namespace mars {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using StateWeights = Eigen::Matrix<double, 13, 1>;

StateWeights stage_weights(const Vec3& p, const Vec4& q_xyzw, const Vec3& v, const Vec3& w) {
  StateWeights d;
  d << p, q_xyzw[3], q_xyzw[0], q_xyzw[1], q_xyzw[2], v, w;
  return d;
}

struct CostModel {
  StateWeights w;
  StateWeights w_terminal;
  Vec4 r;
  Vec4 u_hover;
  Vec4 lo;
  Vec4 hi;
};

CostModel make_cost(const ApcWeights& wt, const BodyParams& body, const WrenchBounds& bounds) {
  CostModel c;
  c.w = stage_weights(wt.q_p, wt.q_q, wt.q_v, wt.q_w);
  c.w_terminal = stage_weights(wt.q_p_N, wt.q_q_N, wt.q_v_N, wt.q_w_N);
  c.r = Vec4(wt.r_F, wt.r_Mx, wt.r_My, wt.r_Mz);
  c.u_hover = hover_command(body).to_vector();
  c.lo = bounds.lo;
  c.hi = bounds.hi;
  return c;
}

void check_inputs(const ReferenceWindow& ref, const ApcWeights& w, const ApcSettings& s) {
  if (s.horizon < 2) throw std::invalid_argument("apc horizon must be at least 2");
  if (!(s.dt > 0.0)) throw std::invalid_argument("apc dt must be positive");
  if (s.max_iterations < 1) throw std::invalid_argument("apc max_iterations must be positive");
  if (ref.states.size() != static_cast<std::size_t>(s.horizon) + 1)
    throw std::invalid_argument("reference window must hold horizon + 1 states");
  const StateWeights a = stage_weights(w.q_p, w.q_q, w.q_v, w.q_w);
  const StateWeights b = stage_weights(w.q_p_N, w.q_q_N, w.q_v_N, w.q_w_N);
  const Vec4 r(w.r_F, w.r_Mx, w.r_My, w.r_Mz);
  if ((a.array() < 0.0).any() || (b.array() < 0.0).any() || (r.array() < 0.0).any())
    throw std::invalid_argument("apc weights must be nonnegative");
  if (a.maxCoeff() <= 0.0) throw std::invalid_argument("apc needs at least one positive stage weight");
}

// Tracking error with the quaternion sign-aligned to the reference. Returns the sign
// applied to q.
double tracking_error(const StateVector& x, const StateVector& ref, StateVector& e) {
  const double s = x.segment<4>(3).dot(ref.segment<4>(3)) < 0.0 ? -1.0 : 1.0;
  e = x - ref;
  e.segment<4>(3) = s * x.segment<4>(3) - ref.segment<4>(3);
  return s;
}

struct Rollout {
  std::vector<StateVector> x;
  std::vector<StateMatrix> a;
  std::vector<InputMatrix> b;
};

void roll_out(const RigidState& x0, const std::vector<Vec4>& u, const BodyParams& body, double dt, bool jacobians,
              Rollout& out) {
  const std::size_t n = u.size();
  out.x.resize(n + 1);
  if (jacobians) {
    out.a.resize(n);
    out.b.resize(n);
  }
  RigidState s = x0;
  out.x[0] = s.to_vector();
  for (std::size_t k = 0; k < n; ++k) {
    const WrenchCommand c = WrenchCommand::from_vector(u[k]);
    s = jacobians ? step(s, c, body, dt, out.a[k], out.b[k]) : step(s, c, body, dt);
    out.x[k + 1] = s.to_vector();
  }
}

double rollout_cost(const Rollout& r, const ReferenceWindow& ref, const CostModel& c, const std::vector<Vec4>& u) {
  const std::size_t n = u.size();
  double j = 0.0;
  StateVector e;
  for (std::size_t k = 1; k <= n; ++k) {
    tracking_error(r.x[k], ref.states[k].to_vector(), e);
    const StateWeights& w = k == n ? c.w_terminal : c.w;
    j += e.dot(w.cwiseProduct(e));
  }
  for (std::size_t k = 0; k < n; ++k) {
    const Vec4 du = u[k] - c.u_hover;
    j += du.dot(c.r.cwiseProduct(du));
  }
  return j;
}

// Gauss-Newton condensing over the input sequence.
void condense(const Rollout& r, const ReferenceWindow& ref, const CostModel& c, const std::vector<Vec4>& u,
              MatrixXd& h, VectorXd& g) {
  const int n = static_cast<int>(u.size());
  h.setZero(4 * n, 4 * n);
  g.resize(4 * n);

  std::vector<StateMatrix> p(static_cast<std::size_t>(n) + 1);
  std::vector<StateVector> lam(static_cast<std::size_t>(n) + 1);
  StateVector e;
  double s = tracking_error(r.x[n], ref.states[n].to_vector(), e);
  StateVector we = c.w_terminal.cwiseProduct(e);
  we.segment<4>(3) *= s;
  p[n] = c.w_terminal.asDiagonal();
  lam[n] = we;
  for (int m = n - 1; m >= 1; --m) {
    s = tracking_error(r.x[m], ref.states[m].to_vector(), e);
    we = c.w.cwiseProduct(e);
    we.segment<4>(3) *= s;
    const StateMatrix& a = r.a[m];
    p[m] = a.transpose() * p[m + 1] * a;
    p[m].diagonal() += c.w;
    lam[m] = we + a.transpose() * lam[m + 1];
  }

  for (int j = 0; j < n; ++j) {
    const InputMatrix& bj = r.b[j];
    g.segment<4>(4 * j) = 2.0 * (bj.transpose() * lam[j + 1] + c.r.cwiseProduct(u[j] - c.u_hover));
    InputMatrix z = p[j + 1] * bj;
    Mat4 hjj = 2.0 * bj.transpose() * z;
    hjj.diagonal() += 2.0 * c.r;
    h.block<4, 4>(4 * j, 4 * j) = hjj;
    for (int i = j - 1; i >= 0; --i) {
      z = r.a[i + 1].transpose() * z;
      const Mat4 hij = 2.0 * r.b[i].transpose() * z;
      h.block<4, 4>(4 * i, 4 * j) = hij;
      h.block<4, 4>(4 * j, 4 * i) = hij.transpose();
    }
  }
}

Vec4 clamp(const Vec4& u, const CostModel& c) { return u.cwiseMax(c.lo).cwiseMin(c.hi); }

ApcSolution solve_impl(const RigidState& x, const ReferenceWindow& ref, const BodyParams& body,
                       const ApcWeights& weights, const WrenchBounds& bounds, const ApcSettings& settings,
                       const std::vector<Vec4>* warm, qp::WorkingSet* ws) {
  check_inputs(ref, weights, settings);
  if ((bounds.lo.array() > bounds.hi.array()).any()) throw std::invalid_argument("wrench bounds need lo <= hi");
  if (!x.to_vector().allFinite()) throw NonFiniteState("apc received a non-finite state");
  const std::size_t n = static_cast<std::size_t>(settings.horizon);
  const CostModel c = make_cost(weights, body, bounds);

  std::vector<Vec4> u(n, c.u_hover);
  if (warm != nullptr) {
    if (warm->size() != n) throw std::invalid_argument("warm start must hold horizon inputs");
    u = *warm;
  }
  for (auto& v : u) v = clamp(v, c);

  ApcSolution sol;
  ApcDiagnostics& diag = sol.diagnostics;
  Rollout r;
  Rollout trial;
  roll_out(x, u, body, settings.dt, true, r);
  double cost = rollout_cost(r, ref, c, u);
  diag.initial_cost = cost;

  MatrixXd h;
  VectorXd g;
  qp::Problem qp_problem;
  qp_problem.A.resize(0, 4 * static_cast<Eigen::Index>(n));
  qp_problem.b.resize(0);
  qp_problem.lo.resize(4 * static_cast<Eigen::Index>(n));
  qp_problem.hi.resize(4 * static_cast<Eigen::Index>(n));
  std::vector<Vec4> cand(n);

  for (int it = 0; it < settings.max_iterations; ++it) {
    condense(r, ref, c, u, h, g);
    h.diagonal().array() += 1e-9;
    for (std::size_t k = 0; k < n; ++k) {
      qp_problem.lo.segment<4>(4 * static_cast<Eigen::Index>(k)) = c.lo - u[k];
      qp_problem.hi.segment<4>(4 * static_cast<Eigen::Index>(k)) = c.hi - u[k];
    }
    qp_problem.H = h;
    qp_problem.g = g;
    const bool use_ws = ws != nullptr && ws->size() == 4 * n;
    const qp::Result res = qp::solve(qp_problem, use_ws ? ws : nullptr);
    diag.qp_iterations += res.iterations;
    if (res.status == qp::Status::kInfeasible) break;
    if (ws != nullptr) *ws = res.working_set;

    double alpha = 1.0;
    bool accepted = false;
    double trial_cost = cost;
    for (int ls = 0; ls < 12; ++ls, alpha *= 0.5) {
      for (std::size_t k = 0; k < n; ++k)
        cand[k] = clamp(u[k] + alpha * res.x.segment<4>(4 * static_cast<Eigen::Index>(k)), c);
      roll_out(x, cand, body, settings.dt, false, trial);
      trial_cost = rollout_cost(trial, ref, c, cand);
      if (trial_cost <= cost) {
        accepted = true;
        break;
      }
    }
    ++diag.iterations;
    if (!accepted) {
      diag.converged = true;
      break;
    }
    const double moved = alpha * res.x.lpNorm<Eigen::Infinity>();
    u.swap(cand);
    cost = trial_cost;
    if (moved <= settings.convergence_tol) {
      diag.converged = true;
      break;
    }
    if (it + 1 < settings.max_iterations) roll_out(x, u, body, settings.dt, true, r);
  }
  diag.cost = cost;
  diag.max_iterations_reached = !diag.converged;
  sol.u0 = WrenchCommand::from_vector(u.front());
  sol.sequence = std::move(u);
  return sol;
}

Vec3 get_vec3(const nlohmann::json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ValidationError(std::string("controller.weights.") + key, "expected 3 numbers");
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

Vec4 get_vec4(const nlohmann::json& j, const char* key, const Vec4& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 4) throw ValidationError(std::string("controller.weights.") + key, "expected 4 numbers");
  return Vec4(a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>());
}

}  // namespace

WrenchBounds actuator_bounds(const Mat4& g, double f_sum_min, double f_sum_max) {
  if (f_sum_min > f_sum_max) throw std::invalid_argument("f_sum_min must not exceed f_sum_max");
  const Mat4 a = g * (f_sum_min / 4.0);
  const Mat4 b = g * (f_sum_max / 4.0);
  return {a.cwiseMin(b).rowwise().sum(), a.cwiseMax(b).rowwise().sum()};
}

ReferenceKind parse_reference_kind(std::string_view name) {
  if (name == "circle") return ReferenceKind::kCircle;
  if (name == "line") return ReferenceKind::kLine;
  if (name == "figure8") return ReferenceKind::kFigure8;
  if (name == "hover") return ReferenceKind::kHover;
  throw ValidationError("scenario", "unknown reference kind '" + std::string(name) + "'");
}

std::string to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::kCircle: return "circle";
    case ReferenceKind::kLine: return "line";
    case ReferenceKind::kFigure8: return "figure8";
    case ReferenceKind::kHover: return "hover";
  }
  return "unknown";
}

RigidState reference_state(ReferenceKind kind, const ReferenceParams& prm, double t) {
  if (!(prm.radius > 0.0) || !(prm.speed >= 0.0)) throw std::invalid_argument("reference needs radius > 0, speed >= 0");
  RigidState s;
  s.p = prm.center;
  const double r = prm.radius;
  const double om = prm.speed / r;
  switch (kind) {
    case ReferenceKind::kCircle:
      s.p += Vec3(r * std::cos(om * t), r * std::sin(om * t), 0.0);
      s.v = Vec3(-r * om * std::sin(om * t), r * om * std::cos(om * t), 0.0);
      break;
    case ReferenceKind::kLine: {
      const Vec3 d = prm.direction.normalized();
      s.p += d * (prm.speed * t);
      s.v = d * prm.speed;
      break;
    }
    case ReferenceKind::kFigure8:
      s.p += Vec3(r * std::sin(om * t), 0.5 * r * std::sin(2.0 * om * t), 0.0);
      s.v = Vec3(r * om * std::cos(om * t), r * om * std::cos(2.0 * om * t), 0.0);
      break;
    case ReferenceKind::kHover:
      break;
  }
  return s;
}

ReferenceWindow generate_reference(ReferenceKind kind, const ReferenceParams& params, double t0,
                                   const ApcSettings& settings) {
  if (settings.horizon < 2 || !(settings.dt > 0.0)) throw std::invalid_argument("invalid apc settings");
  ReferenceWindow w;
  for (int k = 0; k <= settings.horizon; ++k) {
    const double t = t0 + k * settings.dt;
    w.timestamps.push_back(t);
    w.states.push_back(reference_state(kind, params, t));
  }
  return w;
}

double apc_cost(const RigidState& x, const ReferenceWindow& ref, const BodyParams& body, const ApcWeights& w,
                const ApcSettings& settings, const std::vector<Vec4>& inputs) {
  check_inputs(ref, w, settings);
  Rollout r;
  roll_out(x, inputs, body, settings.dt, false, r);
  return rollout_cost(r, ref, make_cost(w, body, {}), inputs);
}

void apc_condensed(const RigidState& x, const ReferenceWindow& ref, const BodyParams& body, const ApcWeights& w,
                   const ApcSettings& settings, const std::vector<Vec4>& inputs, MatrixXd& hessian,
                   VectorXd& gradient) {
  check_inputs(ref, w, settings);
  Rollout r;
  roll_out(x, inputs, body, settings.dt, true, r);
  condense(r, ref, make_cost(w, body, {}), inputs, hessian, gradient);
}

ApcSolution solve_apc(const RigidState& x, const ReferenceWindow& ref, const BodyParams& body,
                      const ApcWeights& weights, const WrenchBounds& bounds, const ApcSettings& settings,
                      const std::vector<Vec4>* warm_start) {
  return solve_impl(x, ref, body, weights, bounds, settings, warm_start, nullptr);
}

ApcController::ApcController(BodyParams body, ApcWeights weights, WrenchBounds bounds, ApcSettings settings)
    : body_(body), weights_(weights), bounds_(bounds), settings_(settings) {}

void ApcController::reset() {
  previous_.clear();
  working_set_.clear();
}

ApcSolution ApcController::update(const RigidState& x, const ReferenceWindow& ref, double elapsed) {
  const std::vector<Vec4>* warm = nullptr;
  std::vector<Vec4> shifted;
  if (!previous_.empty()) {
    const int n = static_cast<int>(previous_.size());
    const double shift = std::max(0.0, elapsed / settings_.dt);
    shifted.resize(previous_.size());
    for (int k = 0; k < n; ++k) {
      const double t = k + shift;
      const int i = std::min(static_cast<int>(t), n - 1);
      const int i1 = std::min(i + 1, n - 1);
      const double a = std::min(t - i, 1.0);
      shifted[static_cast<std::size_t>(k)] = (1.0 - a) * previous_[static_cast<std::size_t>(i)] +
                                             a * previous_[static_cast<std::size_t>(i1)];
    }
    warm = &shifted;
  }
  ApcSolution sol = solve_impl(x, ref, body_, weights_, bounds_, settings_, warm, &working_set_);
  previous_ = sol.sequence;
  return sol;
}

void load_controller_config(std::string_view text, ApcWeights& w, ApcSettings& s) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
  if (!doc.is_object() || !doc.contains("controller")) return;
  const auto& c = doc.at("controller");
  if (!c.is_object()) throw ValidationError("controller", "expected an object");
  try {
    s.horizon = c.value("horizon", s.horizon);
    s.dt = c.value("dt", s.dt);
    s.max_iterations = c.value("max_iterations", s.max_iterations);
    s.convergence_tol = c.value("convergence_tol", s.convergence_tol);
    if (c.contains("weights")) {
      const auto& j = c.at("weights");
      w.q_p = get_vec3(j, "q_p", w.q_p);
      w.q_q = get_vec4(j, "q_q", w.q_q);
      w.q_v = get_vec3(j, "q_v", w.q_v);
      w.q_w = get_vec3(j, "q_w", w.q_w);
      w.q_p_N = get_vec3(j, "q_p_N", w.q_p_N);
      w.q_q_N = get_vec4(j, "q_q_N", w.q_q_N);
      w.q_v_N = get_vec3(j, "q_v_N", w.q_v_N);
      w.q_w_N = get_vec3(j, "q_w_N", w.q_w_N);
      w.r_F = j.value("r_F", w.r_F);
      w.r_Mx = j.value("r_Mx", w.r_Mx);
      w.r_My = j.value("r_My", w.r_My);
      w.r_Mz = j.value("r_Mz", w.r_Mz);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("controller", e.what());
  }
  if (s.horizon < 2) throw ValidationError("controller.horizon", "must be at least 2");
  if (!(s.dt > 0.0) || s.dt > 0.05) throw ValidationError("controller.dt", "must satisfy 0 < dt <= 0.05");
  if (s.max_iterations < 1) throw ValidationError("controller.max_iterations", "must be positive");
  const StateWeights a = stage_weights(w.q_p, w.q_q, w.q_v, w.q_w);
  const StateWeights b = stage_weights(w.q_p_N, w.q_q_N, w.q_v_N, w.q_w_N);
  if ((a.array() < 0.0).any() || (b.array() < 0.0).any() || w.r_F < 0.0 || w.r_Mx < 0.0 || w.r_My < 0.0 ||
      w.r_Mz < 0.0)
    throw ValidationError("controller.weights", "entries must be nonnegative");
  if (a.maxCoeff() <= 0.0) throw ValidationError("controller.weights", "need a positive stage weight");
}

std::string controller_config_json(const ApcWeights& w, const ApcSettings& s) {
  auto arr = [](const auto& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  nlohmann::json j;
  j["horizon"] = s.horizon;
  j["dt"] = s.dt;
  j["max_iterations"] = s.max_iterations;
  j["convergence_tol"] = s.convergence_tol;
  j["weights"] = {{"q_p", arr(w.q_p)},     {"q_q", arr(w.q_q)},     {"q_v", arr(w.q_v)},     {"q_w", arr(w.q_w)},
                  {"q_p_N", arr(w.q_p_N)}, {"q_q_N", arr(w.q_q_N)}, {"q_v_N", arr(w.q_v_N)}, {"q_w_N", arr(w.q_w_N)},
                  {"r_F", w.r_F},          {"r_Mx", w.r_Mx},        {"r_My", w.r_My},        {"r_Mz", w.r_Mz}};
  return j.dump();
}

}  // namespace mars
