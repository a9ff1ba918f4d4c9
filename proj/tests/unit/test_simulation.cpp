#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "mars/errors.hpp"
#include "mars/simulation.hpp"

using namespace mars;
using namespace mars::testing;

namespace {

Scenario short_hover(double duration) {
  Scenario s;
  s.kind = ReferenceKind::kHover;
  s.duration = duration;
  return s;
}

Scenario short_circle(double duration) {
  Scenario s;
  s.kind = ReferenceKind::kCircle;
  s.duration = duration;
  return s;
}

std::string csv_of(const RunReport& r) {
  std::ostringstream out;
  write_csv(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("metrics of trivial logs") {
  const Scenario sc = short_hover(1.0);
  std::vector<LogRow> rows(3);
  for (int k = 0; k < 3; ++k) {
    rows[static_cast<std::size_t>(k)].t = 0.5 * k;
    rows[static_cast<std::size_t>(k)].x = reference_state(sc.kind, sc.params, 0.5 * k);
  }
  Metrics m = compute_metrics(rows, sc);
  CHECK(m.mean_position_error == 0.0);
  CHECK(m.mean_attitude_error == 0.0);
  for (LogRow& r : rows) r.x.p.x() += 0.1;
  m = compute_metrics(rows, sc);
  CHECK(m.mean_position_error == doctest::Approx(0.1));
  CHECK(m.max_position_error == doctest::Approx(0.1));
  CHECK_THROWS(compute_metrics({}, sc));
}

TEST_CASE("lap scenarios and identifiers") {
  ReferenceParams p;
  const Scenario s = lap_scenario(ReferenceKind::kCircle, p, 2.0);
  CHECK(s.duration == doctest::Approx(2 * 2 * M_PI * 1.5));
  CHECK(parse_abstraction_mode("unequal") == AbstractionMode::kUnequal);
  CHECK_THROWS_AS(parse_abstraction_mode("other"), ValidationError);
  CHECK(config_digest(grid(2, 1)) == config_digest(grid(2, 1)));
  CHECK(config_digest(grid(2, 1)) != config_digest(grid(1, 2)));
  CHECK(config_digest(grid(2, 1)).size() == 16);
}

TEST_CASE("hover run holds position and logs every step") {
  for (AbstractionMode mode : {AbstractionMode::kEqual, AbstractionMode::kUnequal}) {
    const RunReport r = run_simulation(grid(2, 1), mode, short_hover(1.0), SimulationOptions{}, 0);
    CHECK(r.failing_step == -1);
    CHECK(r.rows.size() == 501);
    CHECK(r.metrics.max_position_error < 1e-3);
    CHECK(r.infeasible_steps == 0);
    CHECK(r.rows.back().f.size() == 8);
  }
}

TEST_CASE("runs are reproducible byte for byte") {
  SimulationOptions opt;
  opt.perturbation = 0.05;
  const RunReport a = run_simulation(grid(1, 1), AbstractionMode::kEqual, short_circle(0.4), opt, 17);
  const RunReport b = run_simulation(grid(1, 1), AbstractionMode::kEqual, short_circle(0.4), opt, 17);
  CHECK(csv_of(a) == csv_of(b));
  const RunReport c = run_simulation(grid(1, 1), AbstractionMode::kEqual, short_circle(0.4), opt, 18);
  CHECK(csv_of(a) != csv_of(c));
}

TEST_CASE("csv round trip keeps metrics and replays the dynamics") {
  const Scenario sc = short_circle(0.5);
  SimulationOptions opt;
  opt.initial_offset = Vec3(0.1, 0.0, 0.0);
  const RunReport r = run_simulation(grid(1, 1), AbstractionMode::kEqual, sc, opt, 0);
  REQUIRE(r.failing_step == -1);
  std::istringstream in(csv_of(r));
  const std::vector<LogRow> rows = read_csv(in);
  REQUIRE(rows.size() == r.rows.size());
  const Metrics m = compute_metrics(rows, sc);
  CHECK(m.mean_position_error == r.metrics.mean_position_error);
  CHECK(m.max_position_error == r.metrics.max_position_error);
  CHECK(m.mean_attitude_error == r.metrics.mean_attitude_error);

  BodyParams body;
  body.mass = 1.5;
  body.inertia = default_unit().inertia_local;
  RigidState x = rows.front().x;
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    x = step(x, WrenchCommand::from_vector(rows[k].u), body, opt.dt);
    worst = std::max(worst, (x.to_vector() - rows[k + 1].x.to_vector()).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("csv schema violations are parse errors") {
  std::istringstream bad_header("# other/1\nt\n");
  CHECK_THROWS_AS(read_csv(bad_header), ParseError);
  const RunReport r = run_simulation(grid(1, 1), AbstractionMode::kEqual, short_hover(0.01), SimulationOptions{}, 0);
  std::string text = csv_of(r);
  text.insert(text.rfind('\n', text.size() - 2) + 1, "1,2,3\n");
  std::istringstream short_row(text);
  CHECK_THROWS_AS(read_csv(short_row), ParseError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456.789}) CHECK(std::stod(format_double(v)) == v);
}
