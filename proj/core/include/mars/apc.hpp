#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mars/dynamics.hpp"
#include "mars/qp.hpp"

namespace mars {

/// Diagonal tracking weights. Quaternion weights are given in (x, y, z, w) order.
struct ApcWeights {
  Vec3 q_p = Vec3(300.0, 300.0, 400.0);
  Vec4 q_q = Vec4(200.0, 200.0, 100.0, 0.0);
  Vec3 q_v = Vec3(20.0, 20.0, 30.0);
  Vec3 q_w = Vec3(2.0, 2.0, 2.0);
  Vec3 q_p_N = Vec3(6000.0, 6000.0, 6000.0);
  Vec4 q_q_N = Vec4(200.0, 200.0, 100.0, 0.0);
  Vec3 q_v_N = Vec3(600.0, 600.0, 600.0);
  Vec3 q_w_N = Vec3(2.0, 2.0, 2.0);
  double r_F = 0.02;
  double r_Mx = 2.0;
  double r_My = 2.0;
  double r_Mz = 2.0;
};

struct ApcSettings {
  int horizon = 20;
  double dt = 0.02;  // s, prediction grid
  int max_iterations = 2;
  double convergence_tol = 1e-6;
};

struct WrenchBounds {
  Vec4 lo = Vec4::Zero();
  Vec4 hi = Vec4::Zero();
};

struct ReferenceWindow {
  std::vector<RigidState> states;  // horizon + 1 samples
  std::vector<double> timestamps;
};

enum class ReferenceKind { kCircle, kLine, kFigure8, kHover };

struct ReferenceParams {
  double radius = 1.5;  // m
  double speed = 1.0;   // m/s
  Vec3 center = Vec3(0.0, 0.0, 1.0);
  Vec3 direction = Vec3::UnitX();  // line only
};

struct ApcDiagnostics {
  int iterations = 0;     // relinearisation passes performed
  int qp_iterations = 0;  // summed active-set iterations
  double cost = 0.0;      // cost of the returned sequence
  double initial_cost = 0.0;
  bool converged = false;
  bool max_iterations_reached = false;
};

struct ApcSolution {
  WrenchCommand u0;
  std::vector<Vec4> sequence;
  ApcDiagnostics diagnostics;
};

/// Interval hull of G_V v over the 16 virtual vertices with every virtual rotor in
/// [f_sum_min / 4, f_sum_max / 4].
WrenchBounds actuator_bounds(const Mat4& effectiveness, double f_sum_min, double f_sum_max);

ReferenceKind parse_reference_kind(std::string_view name);
std::string to_string(ReferenceKind kind);

RigidState reference_state(ReferenceKind kind, const ReferenceParams& params, double t);
ReferenceWindow generate_reference(ReferenceKind kind, const ReferenceParams& params, double t0,
                                   const ApcSettings& settings);

/// Tracking cost of an input sequence rolled out from x.
double apc_cost(const RigidState& x, const ReferenceWindow& ref, const BodyParams& body, const ApcWeights& w,
                const ApcSettings& settings, const std::vector<Vec4>& inputs);

/// Condensed quadratic model of apc_cost around `inputs`: cost(inputs + d) is
/// approximately cost + g'd + 0.5 d'Hd.
void apc_condensed(const RigidState& x, const ReferenceWindow& ref, const BodyParams& body, const ApcWeights& w,
                   const ApcSettings& settings, const std::vector<Vec4>& inputs, Eigen::MatrixXd& hessian,
                   Eigen::VectorXd& gradient);

/// One receding-horizon solve. The warm start, when given, must have `horizon` entries.
ApcSolution solve_apc(const RigidState& x, const ReferenceWindow& ref, const BodyParams& body,
                      const ApcWeights& weights, const WrenchBounds& bounds, const ApcSettings& settings,
                      const std::vector<Vec4>* warm_start = nullptr);

/// Receding-horizon controller keeping its own warm start between calls.
class ApcController {
 public:
  ApcController(BodyParams body, ApcWeights weights, WrenchBounds bounds, ApcSettings settings);

  /// `elapsed` is the time since the previous call, used to shift the warm start.
  ApcSolution update(const RigidState& x, const ReferenceWindow& ref, double elapsed);

  const ApcSettings& settings() const noexcept { return settings_; }
  const WrenchBounds& bounds() const noexcept { return bounds_; }
  void reset();

 private:
  BodyParams body_;
  ApcWeights weights_;
  WrenchBounds bounds_;
  ApcSettings settings_;
  std::vector<Vec4> previous_;
  qp::WorkingSet working_set_;
};

/// Reads the optional `controller` object of a configuration document. Missing keys
/// keep their defaults.
void load_controller_config(std::string_view text, ApcWeights& weights, ApcSettings& settings);

/// The effective controller configuration as a JSON object.
std::string controller_config_json(const ApcWeights& weights, const ApcSettings& settings);

}  // namespace mars
