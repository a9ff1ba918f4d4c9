#include "mars/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mars/abstraction_equal.hpp"
#include "mars/abstraction_polytope.hpp"
#include "mars/allocation.hpp"
#include "mars/errors.hpp"

namespace mars {
namespace {

struct Plant {
  MarsConfig frame;  // assembly expressed in the virtual body frame
  Vec3 centroid;
  BodyParams body;
  Mat4 g_v;
  double f_sum_min = 0.0;
  double f_sum_max = 0.0;
};

Plant build_plant(const MarsConfig& config, AbstractionMode mode) {
  Plant p;
  p.centroid = centroid(config);
  p.body.gravity = config.gravity;
  if (mode == AbstractionMode::kEqual) {
    const EqualArmAbstraction a = equal_arm_abstraction(config);
    p.frame = rotated_about_z(config, p.centroid, a.yaw_opt);
    p.body.mass = a.mass;
    p.body.inertia = a.inertia;
    p.g_v = a.effectiveness;
    p.f_sum_min = rotor_force_lower(config).sum();
    p.f_sum_max = rotor_force_upper(config).sum();
  } else {
    const UnequalArmAbstraction a = unequal_arm_abstraction(config);
    p.frame = config;
    p.body.mass = a.mass;
    p.body.inertia = a.inertia;
    p.g_v = a.effectiveness;
    p.f_sum_min = a.f_sum_min;
    p.f_sum_max = a.f_sum_max;
  }
  return p;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

const char* const kStateColumns[] = {"t",  "px", "py", "pz", "qw", "qx", "qy", "qz", "vx",
                                     "vy", "vz", "wx", "wy", "wz", "F",  "Mx", "My", "Mz"};

}  // namespace

AbstractionMode parse_abstraction_mode(std::string_view name) {
  if (name == "equal") return AbstractionMode::kEqual;
  if (name == "unequal") return AbstractionMode::kUnequal;
  throw ValidationError("mode", "expected 'equal' or 'unequal'");
}

std::string to_string(AbstractionMode mode) { return mode == AbstractionMode::kEqual ? "equal" : "unequal"; }

Scenario lap_scenario(ReferenceKind kind, const ReferenceParams& params, double laps) {
  if (!(params.speed > 0.0)) throw std::invalid_argument("lap scenarios need a positive speed");
  Scenario s;
  s.kind = kind;
  s.params = params;
  s.duration = laps * 2.0 * std::numbers::pi * params.radius / params.speed;
  return s;
}

std::string scenario_id(const Scenario& s) {
  std::ostringstream os;
  os << to_string(s.kind) << "-r" << format_double(s.params.radius) << "-v" << format_double(s.params.speed) << "-T"
     << format_double(s.duration);
  return os.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string config_digest(const MarsConfig& config) {
  std::string s;
  auto put = [&s](double v) {
    s += format_double(v);
    s += ',';
  };
  put(config.gravity);
  for (const UnitSpec& u : config.units) {
    put(u.mass);
    for (int i = 0; i < 3; ++i) put(u.position[i]);
    for (int i = 0; i < 9; ++i) put(u.inertia_local(i));
    for (const RotorSpec& r : u.rotors) {
      for (int i = 0; i < 3; ++i) put(r.offset[i]);
      put(r.spin_sign);
      put(r.f_min);
      put(r.f_max);
      put(r.c_z);
    }
    s += ';';
  }
  if (config.payload) {
    put(config.payload->mass);
    for (int i = 0; i < 3; ++i) put(config.payload->position[i]);
    for (int i = 0; i < 9; ++i) put(config.payload->inertia_local(i));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return buf;
}

RunReport run_simulation(const MarsConfig& config, AbstractionMode mode, const Scenario& scenario,
                         const SimulationOptions& options, std::uint64_t seed) {
  validate(config);
  if (!(options.dt > 0.0) || options.dt > 0.05) throw std::invalid_argument("simulation dt must be in (0, 0.05]");
  if (!(scenario.duration >= 0.0)) throw std::invalid_argument("scenario duration must be nonnegative");

  const Plant plant = build_plant(config, mode);
  const WrenchBounds bounds = actuator_bounds(plant.g_v, plant.f_sum_min, plant.f_sum_max);
  const WrenchCommand hover = hover_command(plant.body);
  if (hover.F > bounds.hi[0] || hover.F < bounds.lo[0])
    throw InfeasibleWrench("the assembly cannot produce its hover thrust");

  ApcController controller(plant.body, options.weights, bounds, options.settings);
  Allocator allocator(plant.frame);

  RunReport report;
  report.scenario = scenario_id(scenario);
  report.config_digest = config_digest(config);
  report.abstraction = to_string(mode);
  report.dt = options.dt;
  report.controller = controller_config_json(options.weights, options.settings);

  RigidState x = reference_state(scenario.kind, scenario.params, 0.0);
  x.p += options.initial_offset;
  if (options.perturbation > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, options.perturbation);
    for (int i = 0; i < 3; ++i) x.p[i] += n(rng);
  }

  const auto steps = static_cast<long>(std::llround(scenario.duration / options.dt));
  report.rows.reserve(static_cast<std::size_t>(steps) + 1);
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(steps) + 1);
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * options.dt;
    LogRow row;
    row.t = t;
    row.x = x;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const ReferenceWindow ref = generate_reference(scenario.kind, scenario.params, t, options.settings);
      const ApcSolution sol = controller.update(x, ref, options.dt);
      const Allocation alloc = allocator.allocate(sol.u0);
      const WrenchCommand applied = recompose(per_unit_commands(alloc.f, plant.frame), plant.frame, plant.centroid);
      times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());

      row.u = applied.to_vector();
      row.f = alloc.f;
      row.alloc_feasible = alloc.diagnostics.feasible;
      row.alloc_iters = alloc.diagnostics.iterations;
      report.infeasible_steps += alloc.diagnostics.feasible ? 0 : 1;
      report.apc_iteration_cap_steps += sol.diagnostics.max_iterations_reached ? 1 : 0;
      report.rows.push_back(row);
      if (k < steps) x = step(x, applied, plant.body, options.dt);
    } catch (const std::exception& e) {
      report.failing_step = static_cast<int>(k);
      report.error = e.what();
      break;
    }
  }
  if (!report.rows.empty()) report.metrics = compute_metrics(report.rows, scenario);
  report.timing = {percentile(times, 0.5), percentile(times, 0.9), percentile(times, 0.99),
                   times.empty() ? 0.0 : *std::max_element(times.begin(), times.end())};
  return report;
}

Metrics compute_metrics(const std::vector<LogRow>& rows, const Scenario& scenario) {
  if (rows.empty()) throw std::invalid_argument("metrics need at least one row");
  Metrics m;
  double sum_p = 0.0;
  double sum_a = 0.0;
  for (const LogRow& r : rows) {
    const RigidState ref = reference_state(scenario.kind, scenario.params, r.t);
    const double e = (r.x.p - ref.p).norm();
    sum_p += e;
    m.max_position_error = std::max(m.max_position_error, e);
    const Vec4 dq = quat_multiply(quat_conjugate(ref.q), r.x.q);
    const double w = std::min(1.0, std::abs(dq[0]) / dq.norm());
    sum_a += 2.0 * std::acos(w) * 180.0 / std::numbers::pi;
  }
  const auto n = static_cast<double>(rows.size());
  m.mean_position_error = sum_p / n;
  m.mean_attitude_error = sum_a / n;
  return m;
}

void write_csv(std::ostream& out, const RunReport& report) {
  const Eigen::Index nf = report.rows.empty() ? 0 : report.rows.front().f.size();
  out << "# " << kCsvVersion << " scenario=" << report.scenario << " config=" << report.config_digest
      << " abstraction=" << report.abstraction << " dt=" << format_double(report.dt) << '\n';
  for (const char* c : kStateColumns) out << c << ',';
  for (Eigen::Index i = 0; i < nf; ++i) out << "f_" << i + 1 << ',';
  out << "alloc_feasible,alloc_iters\n";
  std::string line;
  for (const LogRow& r : report.rows) {
    line.clear();
    auto put = [&line](double v) {
      line += format_double(v);
      line += ',';
    };
    put(r.t);
    for (int i = 0; i < 3; ++i) put(r.x.p[i]);
    for (int i = 0; i < 4; ++i) put(r.x.q[i]);
    for (int i = 0; i < 3; ++i) put(r.x.v[i]);
    for (int i = 0; i < 3; ++i) put(r.x.omega[i]);
    for (int i = 0; i < 4; ++i) put(r.u[i]);
    for (Eigen::Index i = 0; i < r.f.size(); ++i) put(r.f[i]);
    line += r.alloc_feasible ? "1," : "0,";
    line += std::to_string(r.alloc_iters);
    line += '\n';
    out << line;
  }
}

void write_csv(const std::filesystem::path& path, const RunReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(f, report);
}

std::vector<LogRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(std::string("# ") + kCsvVersion, 0) != 0)
    throw ParseError("missing " + std::string(kCsvVersion) + " header");
  if (!std::getline(in, line)) throw ParseError("missing column header");
  const std::vector<std::string_view> cols = split(line);
  const std::size_t fixed = std::size(kStateColumns);
  if (cols.size() < fixed + 2) throw ParseError("too few columns");
  for (std::size_t i = 0; i < fixed; ++i)
    if (cols[i] != kStateColumns[i]) throw ParseError("unexpected column '" + std::string(cols[i]) + "'");
  const std::size_t nf = cols.size() - fixed - 2;
  if (cols[fixed + nf] != "alloc_feasible" || cols[fixed + nf + 1] != "alloc_iters")
    throw ParseError("unexpected trailing columns");

  std::vector<LogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string_view> v = split(line);
    if (v.size() != cols.size()) throw ParseError("row " + std::to_string(rows.size()) + " has a wrong field count");
    LogRow r;
    r.t = parse_double(v[0]);
    StateVector s;
    for (int i = 0; i < 13; ++i) s[i] = parse_double(v[static_cast<std::size_t>(i) + 1]);
    r.x = RigidState::from_vector(s);
    for (int i = 0; i < 4; ++i) r.u[i] = parse_double(v[static_cast<std::size_t>(i) + 14]);
    r.f.resize(static_cast<Eigen::Index>(nf));
    for (std::size_t i = 0; i < nf; ++i) r.f[static_cast<Eigen::Index>(i)] = parse_double(v[fixed + i]);
    r.alloc_feasible = v[fixed + nf] == "1";
    r.alloc_iters = static_cast<int>(parse_double(v[fixed + nf + 1]));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<LogRow> read_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return read_csv(f);
}

std::string report_json(const RunReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["config_digest"] = r.config_digest;
  j["abstraction"] = r.abstraction;
  j["dt"] = r.dt;
  j["rows"] = r.rows.size();
  j["metrics"] = {{"mean_abs_position_error_m", r.metrics.mean_position_error},
                  {"max_position_error_m", r.metrics.max_position_error},
                  {"mean_abs_attitude_error_deg", r.metrics.mean_attitude_error}};
  j["solve_time_ms"] = {{"p50", r.timing.p50}, {"p90", r.timing.p90}, {"p99", r.timing.p99}, {"max", r.timing.max}};
  j["infeasible_steps"] = r.infeasible_steps;
  j["apc_iteration_cap_steps"] = r.apc_iteration_cap_steps;
  j["failing_step"] = r.failing_step;
  if (!r.error.empty()) j["error"] = r.error;
  j["controller"] = nlohmann::json::parse(r.controller);
  return j.dump(2);
}

}  // namespace mars
