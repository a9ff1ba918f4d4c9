#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mars/apc.hpp"
#include "mars/dynamics.hpp"
#include "mars/geometry.hpp"

namespace mars {

enum class AbstractionMode { kEqual, kUnequal };

AbstractionMode parse_abstraction_mode(std::string_view name);
std::string to_string(AbstractionMode mode);

struct Scenario {
  ReferenceKind kind = ReferenceKind::kCircle;
  ReferenceParams params;
  double duration = 10.0;  // s
};

/// Scenario lasting `laps` full circuits of a circle or figure-eight.
Scenario lap_scenario(ReferenceKind kind, const ReferenceParams& params, double laps);
std::string scenario_id(const Scenario& scenario);

struct SimulationOptions {
  double dt = 0.002;  // plant and control period
  ApcWeights weights;
  ApcSettings settings;
  Vec3 initial_offset = Vec3::Zero();  // added to the reference start position
  double perturbation = 0.0;           // std dev of a seeded start position perturbation, m
};

struct LogRow {
  double t = 0.0;
  RigidState x;
  Vec4 u = Vec4::Zero();  // applied wrench after allocation round-trip
  Eigen::VectorXd f;
  bool alloc_feasible = true;
  int alloc_iters = 0;
};

struct Metrics {
  double mean_position_error = 0.0;  // m
  double max_position_error = 0.0;   // m
  double mean_attitude_error = 0.0;  // deg
};

struct Timing {
  double p50 = 0.0;  // ms per control step
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

struct RunReport {
  std::string scenario;
  std::string config_digest;
  std::string abstraction;
  double dt = 0.002;
  std::vector<LogRow> rows;
  Metrics metrics;
  Timing timing;
  int infeasible_steps = 0;
  int apc_iteration_cap_steps = 0;
  int failing_step = -1;  // first step that raised, -1 when the run completed
  std::string error;
  std::string controller;  // effective controller configuration, JSON
};

/// FNV-1a 64-bit digest of the canonical configuration, as 16 hex digits.
std::string config_digest(const MarsConfig& config);

/// Closed loop at 1 / dt: APC on the virtual quadrotor, allocation to rotors, per-unit
/// recomposition, then one integration step with the recomposed wrench.
RunReport run_simulation(const MarsConfig& config, AbstractionMode mode, const Scenario& scenario,
                         const SimulationOptions& options, std::uint64_t seed);

Metrics compute_metrics(const std::vector<LogRow>& rows, const Scenario& scenario);

inline constexpr const char* kCsvVersion = "mars-sim-csv/1";

void write_csv(std::ostream& out, const RunReport& report);
void write_csv(const std::filesystem::path& path, const RunReport& report);

/// Rows of a CSV produced by write_csv. Throws ParseError on schema mismatch.
std::vector<LogRow> read_csv(std::istream& in);
std::vector<LogRow> read_csv(const std::filesystem::path& path);

/// Summary as a JSON object.
std::string report_json(const RunReport& report);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace mars
