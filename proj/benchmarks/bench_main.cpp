#include <benchmark/benchmark.h>

#include <cmath>

#include "mars/abstraction_equal.hpp"
#include "mars/abstraction_polytope.hpp"
#include "mars/allocation.hpp"
#include "mars/apc.hpp"
#include "mars/dynamics.hpp"
#include "mars/magnetics.hpp"

namespace {

mars::MarsConfig grid_for(int n) {
  switch (n) {
    case 1: return mars::build_grid_config(1, 1, 0.65, mars::default_unit());
    case 2: return mars::build_grid_config(1, 2, 0.65, mars::default_unit());
    case 4: return mars::build_grid_config(2, 2, 0.65, mars::default_unit());
    case 8: return mars::build_grid_config(2, 4, 0.65, mars::default_unit());
    case 16: return mars::build_grid_config(4, 4, 0.65, mars::default_unit());
    case 32: return mars::build_grid_config(4, 8, 0.65, mars::default_unit());
    default: return mars::build_grid_config(5, 10, 0.65, mars::default_unit());
  }
}

void BM_AllocateWarm(benchmark::State& state) {
  const mars::MarsConfig cfg = grid_for(static_cast<int>(state.range(0)));
  mars::Allocator alloc(cfg);
  const double hover = mars::total_mass(cfg) * cfg.gravity;
  int k = 0;
  for (auto _ : state) {
    const double s = 0.5 + 0.5 * std::sin(0.01 * k++);
    mars::WrenchCommand u{hover * (1.0 + 0.1 * s), mars::Vec3(0.2 * s, 0.1 * s, 0.02 * s)};
    benchmark::DoNotOptimize(alloc.allocate(u));
  }
}
BENCHMARK(BM_AllocateWarm)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Arg(50);

void BM_DynamicsStep(benchmark::State& state) {
  mars::BodyParams b{1.5, mars::default_unit().inertia_local, 9.81};
  mars::RigidState s;
  s.omega = mars::Vec3(0.1, -0.2, 0.3);
  for (auto _ : state) {
    s = mars::step(s, mars::hover_command(b), b, 0.002);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_DynamicsStep);

void BM_ApcSolve(benchmark::State& state) {
  const auto cfg = grid_for(1);
  const auto abs = mars::equal_arm_abstraction(cfg);
  mars::BodyParams b{abs.mass, abs.inertia, 9.81};
  const auto bounds = mars::actuator_bounds(abs.effectiveness, 0.0, 28.0);
  mars::ApcSettings st;
  mars::ReferenceParams rp;
  mars::ApcController ctl(b, {}, bounds, st);
  mars::RigidState x = mars::reference_state(mars::ReferenceKind::kCircle, rp, 0.0);
  double t = 0.0;
  for (auto _ : state) {
    const auto ref = mars::generate_reference(mars::ReferenceKind::kCircle, rp, t, st);
    const auto sol = ctl.update(x, ref, 0.002);
    x = mars::step(x, sol.u0, b, 0.002);
    t += 0.002;
  }
}
BENCHMARK(BM_ApcSolve)->Unit(benchmark::kMicrosecond);

void BM_EqualArm(benchmark::State& state) {
  const auto cfg = grid_for(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mars::equal_arm_abstraction(cfg));
}
BENCHMARK(BM_EqualArm)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_UnequalArm(benchmark::State& state) {
  const auto cfg = grid_for(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mars::unequal_arm_abstraction(cfg));
}
BENCHMARK(BM_UnequalArm)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MagnetSearch(benchmark::State& state) {
  mars::LatticeSpec spec;
  const auto pts = mars::observation_ring(spec);
  for (auto _ : state) benchmark::DoNotOptimize(mars::optimize_arrangement(spec, pts, 1e300, 1));
}
BENCHMARK(BM_MagnetSearch)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
