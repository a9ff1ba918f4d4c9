#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mars/abstraction_equal.hpp"
#include "mars/abstraction_polytope.hpp"
#include "mars/allocation.hpp"
#include "mars/apc.hpp"
#include "mars/errors.hpp"
#include "mars/magnetics.hpp"
#include "mars/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kValidation = 2, kSolver = 3, kInfeasible = 4 };

struct Global {
  std::string config;
  std::string grid;
  std::string out;
  std::uint64_t seed = 0;
  std::string format = "report";
};

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw mars::ValidationError("config", "cannot read " + p.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// "AxB": A units along x, B along y.
mars::MarsConfig grid_config(const std::string& spec) {
  int ax = 0;
  int by = 0;
  char sep = 0;
  std::istringstream is(spec);
  if (!(is >> ax >> sep >> by) || sep != 'x' || ax < 1 || by < 1 || !is.eof())
    throw mars::ValidationError("grid", "expected COLSxROWS, e.g. 2x1");
  return mars::build_grid_config(by, ax, 0.65, mars::default_unit());
}

mars::MarsConfig load(const Global& g) {
  if (!g.config.empty() && !g.grid.empty()) throw mars::ValidationError("config", "use either --config or --grid");
  if (!g.grid.empty()) return grid_config(g.grid);
  if (g.config.empty()) throw mars::ValidationError("config", "--config or --grid is required");
  return mars::load_config(read_text(g.config));
}

json to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json rotors_json(const mars::VirtualRotors& r) {
  json a = json::array();
  for (const auto& p : r) a.push_back({p.x(), p.y()});
  return a;
}

void emit(const Global& g, const std::string& name, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  fs::create_directories(g.out);
  std::ofstream f(fs::path(g.out) / name, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (fs::path(g.out) / name).string());
  f << text;
}

int cmd_abstract(const Global& g, const std::string& mode) {
  const mars::MarsConfig cfg = load(g);
  json j;
  j["units"] = cfg.unit_count();
  j["mass"] = mars::total_mass(cfg);
  if (mode == "equal" || mode == "both") {
    const auto a = mars::equal_arm_abstraction(cfg);
    j["equal"] = {{"yaw_opt_rad", a.yaw_opt},
                  {"objective_at_yaw_opt", mars::yaw_objective(cfg, a.yaw_opt, {})},
                  {"objective_at_zero", mars::yaw_objective(cfg, 0.0, {})},
                  {"virtual_rotors", rotors_json(a.virtual_rotors)},
                  {"c_vz", a.c_vz},
                  {"effectiveness", to_json(a.effectiveness)},
                  {"inertia", to_json(a.inertia)}};
  }
  if (mode == "unequal" || mode == "both") {
    const auto a = mars::unequal_arm_abstraction(cfg);
    const auto err = mars::approximation_error(a, cfg);
    const auto b = mars::actuator_bounds(a.effectiveness, a.f_sum_min, a.f_sum_max);
    j["unequal"] = {{"virtual_rotors", rotors_json(a.virtual_rotors)},
                    {"c_vz", a.c_vz},
                    {"effectiveness", to_json(a.effectiveness)},
                    {"inertia", to_json(a.inertia)},
                    {"f_sum", {a.f_sum_min, a.f_sum_max}},
                    {"objective", a.objective},
                    {"approximation_error", err.per_axis},
                    {"approximation_error_defined", err.defined},
                    {"approximation_error_mean", err.mean_abs},
                    {"bounds_lo", vec_json(b.lo)},
                    {"bounds_hi", vec_json(b.hi)}};
  }
  if (!j.contains("equal") && !j.contains("unequal"))
    throw mars::ValidationError("mode", "expected equal, unequal or both");
  emit(g, "abstraction.json", j.dump(2));
  return kOk;
}

struct SimArgs {
  std::string mode = "equal";
  std::string scenario = "circle";
  double radius = 1.5;
  double speed = 1.0;
  double height = 1.0;
  double laps = 10.0;
  double duration = -1.0;
  double perturb = 0.0;
};

int cmd_simulate(const Global& g, const SimArgs& a) {
  const mars::MarsConfig cfg = load(g);
  mars::SimulationOptions opt;
  if (!g.config.empty()) mars::load_controller_config(read_text(g.config), opt.weights, opt.settings);
  opt.perturbation = a.perturb;
  mars::ReferenceParams rp;
  rp.radius = a.radius;
  rp.speed = a.speed;
  rp.center = mars::Vec3(0.0, 0.0, a.height);
  const mars::ReferenceKind kind = mars::parse_reference_kind(a.scenario);
  mars::Scenario sc;
  if (a.duration >= 0.0 || kind == mars::ReferenceKind::kHover || kind == mars::ReferenceKind::kLine) {
    sc.kind = kind;
    sc.params = rp;
    sc.duration = a.duration >= 0.0 ? a.duration : 10.0;
  } else {
    sc = mars::lap_scenario(kind, rp, a.laps);
  }
  const mars::RunReport r = mars::run_simulation(cfg, mars::parse_abstraction_mode(a.mode), sc, opt, g.seed);
  if (g.format == "csv") {
    std::ostringstream os;
    mars::write_csv(os, r);
    emit(g, "run.csv", os.str());
    if (!g.out.empty()) emit(g, "report.json", mars::report_json(r));
  } else {
    emit(g, "report.json", mars::report_json(r));
    if (!g.out.empty()) mars::write_csv(fs::path(g.out) / "run.csv", r);
  }
  if (r.failing_step >= 0) {
    std::cerr << "simulation failed at step " << r.failing_step << ": " << r.error << '\n';
    return kSolver;
  }
  return kOk;
}

int cmd_allocate(const Global& g, const std::vector<double>& wrench) {
  const mars::MarsConfig cfg = load(g);
  if (wrench.size() != 4) throw mars::ValidationError("wrench", "expected F,Mx,My,Mz");
  mars::Allocator alloc(cfg);
  const mars::WrenchCommand u{wrench[0], mars::Vec3(wrench[1], wrench[2], wrench[3])};
  const mars::Allocation res = alloc.allocate(u);
  const auto cmds = mars::per_unit_commands(res.f, cfg);
  if (g.format == "csv") {
    std::ostringstream os;
    os << "rotor,force\n";
    for (Eigen::Index i = 0; i < res.f.size(); ++i) os << i + 1 << ',' << mars::format_double(res.f[i]) << '\n';
    emit(g, "allocation.csv", os.str());
  } else {
    json units = json::array();
    for (const auto& c : cmds) units.push_back({{"F", c.F}, {"M", {c.M.x(), c.M.y(), c.M.z()}}});
    json j = {{"f", vec_json(res.f)},
              {"units", units},
              {"diagnostics",
               {{"residual", vec_json(res.diagnostics.residual)},
                {"variance", res.diagnostics.variance},
                {"iterations", res.diagnostics.iterations},
                {"feasible", res.diagnostics.feasible},
                {"torque_scale", res.diagnostics.torque_scale}}}};
    emit(g, "allocation.json", j.dump(2));
  }
  return res.diagnostics.feasible ? kOk : kInfeasible;
}

int cmd_magnets(const Global& g, const mars::LatticeSpec& spec, double target) {
  const auto points = mars::observation_ring(spec);
  const auto res = mars::optimize_arrangement(spec, points, target, g.seed);
  const double base = mars::field_objective(mars::uniform_baseline(spec, res.best.layers), points);
  const double best = res.history.back();
  if (g.format == "csv") {
    std::ostringstream os;
    os << "# history\nlayers,objective\n";
    for (std::size_t i = 0; i < res.history.size(); ++i)
      os << i + 1 << ',' << mars::format_double(res.history[i]) << '\n';
    os << "# arrangement\nx,y,z,mx,my,mz\n";
    for (const auto& m : res.best.magnets) {
      for (int i = 0; i < 3; ++i) os << mars::format_double(m.position[i]) << ',';
      os << mars::format_double(m.moment.x()) << ',' << mars::format_double(m.moment.y()) << ','
         << mars::format_double(m.moment.z()) << '\n';
    }
    emit(g, "magnets.csv", os.str());
  } else {
    json j = {{"layers", res.best.layers},
              {"orientation", res.best.orientation},
              {"history", res.history},
              {"objective", best},
              {"baseline_objective", base},
              {"gain_percent", 100.0 * (best / base - 1.0)},
              {"superposed_field", mars::superposed_field_norm(res.best.magnets, points)},
              {"baseline_superposed_field", mars::superposed_field_norm(mars::uniform_baseline(spec, res.best.layers), points)},
              {"target_reached", res.target_reached},
              {"evaluations", res.evaluations}};
    emit(g, "magnets.json", j.dump(2));
  }
  if (!res.target_reached && std::isfinite(target)) std::cerr << "target field not reached; best arrangement reported\n";
  return kOk;
}

int cmd_bench(const Global& g, int solves) {
  const std::vector<std::pair<int, int>> grids = {{1, 1}, {1, 2}, {2, 2}, {2, 4}, {4, 4}, {4, 8}, {5, 10}};
  std::ostringstream os;
  os << "n,median_ms,p90_ms,max_iterations\n";
  for (const auto& [rows, cols] : grids) {
    const mars::MarsConfig cfg = mars::build_grid_config(rows, cols, 0.65, mars::default_unit());
    mars::Allocator alloc(cfg);
    const double hover = mars::total_mass(cfg) * cfg.gravity;
    const double reach = 0.1 * std::sqrt(static_cast<double>(cfg.unit_count()));
    std::vector<double> ms;
    int iters = 0;
    for (int k = 0; k < solves; ++k) {
      const double s = static_cast<double>(k) / std::max(1, solves - 1);
      const mars::WrenchCommand u{hover * (1.0 + 0.2 * s),
                                  mars::Vec3(reach * s * std::sin(0.02 * k), reach * s, 0.05 * s)};
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = alloc.allocate(u);
      ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      iters = std::max(iters, res.diagnostics.iterations);
    }
    std::sort(ms.begin(), ms.end());
    os << cfg.unit_count() << ',' << ms[ms.size() / 2] << ',' << ms[ms.size() * 9 / 10] << ',' << iters << '\n';
  }
  emit(g, "bench.csv", os.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular aerial robot abstraction, control and magnet layout toolkit"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config, "Configuration document (JSON)");
  app.add_option("--grid", g.grid, "Rectangular assembly COLSxROWS of default units instead of --config");
  app.add_option("--out", g.out, "Output directory (stdout when omitted)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "report"}));

  std::string abs_mode = "both";
  auto* abstract = app.add_subcommand("abstract", "Build the virtual quadrotor abstractions");
  abstract->add_option("--mode", abs_mode)->check(CLI::IsMember({"equal", "unequal", "both"}));

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop tracking simulation");
  simulate->add_option("--mode", sim.mode)->check(CLI::IsMember({"equal", "unequal"}));
  simulate->add_option("--scenario", sim.scenario)->check(CLI::IsMember({"circle", "line", "figure8", "hover"}));
  simulate->add_option("--radius", sim.radius);
  simulate->add_option("--speed", sim.speed);
  simulate->add_option("--height", sim.height);
  simulate->add_option("--laps", sim.laps);
  simulate->add_option("--duration", sim.duration, "Seconds; overrides --laps");
  simulate->add_option("--perturb", sim.perturb, "Std dev of the seeded start position perturbation, m");

  std::vector<double> wrench;
  auto* allocate = app.add_subcommand("allocate", "Allocate a wrench to rotor forces");
  allocate->add_option("--wrench", wrench, "F,Mx,My,Mz")->delimiter(',')->required();

  mars::LatticeSpec lattice;
  double target = std::numeric_limits<double>::infinity();
  auto* magnets = app.add_subcommand("magnets", "Layer-wise magnet arrangement search");
  magnets->add_option("--layers", lattice.layers);
  magnets->add_option("--per-layer", lattice.magnets_per_layer);
  magnets->add_option("--radius", lattice.radius);
  magnets->add_option("--pitch", lattice.pitch);
  magnets->add_option("--target", target, "Desired objective, T");

  int solves = 1000;
  auto* bench = app.add_subcommand("bench", "Warm-started allocator latency table");
  bench->add_option("--solves", solves);

  for (auto* sub : {abstract, simulate, allocate, magnets, bench}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*abstract) return cmd_abstract(g, abs_mode);
    if (*simulate) return cmd_simulate(g, sim);
    if (*allocate) return cmd_allocate(g, wrench);
    if (*magnets) return cmd_magnets(g, lattice, target);
    if (*bench) return cmd_bench(g, solves);
  } catch (const mars::InfeasibleAbstraction& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const mars::InfeasibleWrench& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const mars::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kValidation;
  } catch (const mars::ValidationError& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kValidation;
  } catch (const mars::DegenerateConfig& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kValidation;
  } catch (const mars::TooManyUnits& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  }
  return kOk;
}
