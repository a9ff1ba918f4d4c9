#include "mars/magnetics.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mars/errors.hpp"

namespace mars {
namespace {

constexpr int kOrientations = 6;
constexpr int kExhaustiveLayers = 7;
constexpr int kRestarts = 16;

void check_spec(const LatticeSpec& s) {
  if (s.layers < 1) throw std::invalid_argument("lattice needs at least one layer");
  if (s.magnets_per_layer < 2 || s.magnets_per_layer % 2 != 0)
    throw std::invalid_argument("magnets per layer must be a positive even number");
  if (!(s.radius > 0.0) || !(s.pitch > 0.0) || !(s.magnitude > 0.0))
    throw std::invalid_argument("lattice radius, pitch and magnitude must be positive");
}

// table(l, o): objective contribution of layer l with orientation o.
Eigen::MatrixXd layer_table(const LatticeSpec& spec, const std::vector<Vec3>& points) {
  Eigen::MatrixXd t(spec.layers, kOrientations);
  const std::vector<Vec3> pos = docking_lattice(spec.layers, spec.magnets_per_layer, spec.radius, spec.pitch);
  const int m = spec.magnets_per_layer;
  for (int l = 0; l < spec.layers; ++l) {
    for (int o = 0; o < kOrientations; ++o) {
      std::vector<Magnet> layer;
      for (int k = 0; k < m; ++k) {
        const int oo = k < m / 2 ? o : opposite_orientation(o);
        layer.push_back({pos[static_cast<std::size_t>(l * m + k)], spec.magnitude * orientation_axis(oo)});
      }
      t(l, o) = field_objective(layer, points);
    }
  }
  return t;
}

struct BranchAndBound {
  const Eigen::MatrixXd& table;
  int layers;
  Eigen::VectorXd suffix_bound;
  std::vector<int> current;
  std::vector<int> best;
  double best_value = -1.0;
  std::uint64_t nodes = 0;

  BranchAndBound(const Eigen::MatrixXd& t, int l) : table(t), layers(l), suffix_bound(Eigen::VectorXd::Zero(l + 1)) {
    for (int i = l - 1; i >= 0; --i) suffix_bound[i] = suffix_bound[i + 1] + table.row(i).maxCoeff();
    current.assign(static_cast<std::size_t>(l), 0);
  }

  void run(int depth, double partial) {
    ++nodes;
    if (depth == layers) {
      if (partial > best_value) {
        best_value = partial;
        best = current;
      }
      return;
    }
    for (int o = 0; o < kOrientations; ++o) {
      const double v = partial + table(depth, o);
      if (v + suffix_bound[depth + 1] <= best_value) continue;
      current[static_cast<std::size_t>(depth)] = o;
      run(depth + 1, v);
    }
  }
};

double assignment_value(const Eigen::MatrixXd& table, const std::vector<int>& a) {
  double v = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) v += table(static_cast<Eigen::Index>(l), a[l]);
  return v;
}

std::vector<int> hill_climb(const Eigen::MatrixXd& table, int layers, std::mt19937_64& rng, std::uint64_t& evals) {
  std::uniform_int_distribution<int> pick(0, kOrientations - 1);
  std::vector<int> best;
  double best_value = -1.0;
  for (int r = 0; r < kRestarts; ++r) {
    std::vector<int> a(static_cast<std::size_t>(layers));
    for (int& o : a) o = pick(rng);
    double value = assignment_value(table, a);
    bool improved = true;
    while (improved) {
      improved = false;
      for (int l = 0; l < layers; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        for (int o = 0; o < kOrientations; ++o) {
          ++evals;
          const double cand = value - table(l, a[li]) + table(l, o);
          if (cand > value) {
            a[li] = o;
            value = cand;
            improved = true;
          }
        }
      }
    }
    if (value > best_value) {
      best_value = value;
      best = a;
    }
  }
  return best;
}

}  // namespace

Vec3 orientation_axis(int o) {
  if (o < 0 || o >= kOrientations) throw std::invalid_argument("orientation index must be in 0..5");
  Vec3 a = Vec3::Zero();
  a[o / 2] = o % 2 == 0 ? 1.0 : -1.0;
  return a;
}

int opposite_orientation(int o) { return o ^ 1; }

Vec3 dipole_field(const Vec3& position, const Vec3& moment, const Vec3& point) {
  const Vec3 r = point - position;
  const double n2 = r.squaredNorm();
  if (!(n2 > 1e-24)) throw CoincidentPoint("field point coincides with a dipole");
  const double n = std::sqrt(n2);
  const double n3 = n2 * n;
  return kMu0Over4Pi * (3.0 * r * moment.dot(r) / (n3 * n2) - moment / n3);
}

double field_objective(const std::vector<Magnet>& magnets, const std::vector<Vec3>& points) {
  if (points.empty()) throw std::invalid_argument("observation set must not be empty");
  double total = 0.0;
  for (const Vec3& r : points)
    for (const Magnet& m : magnets) total += dipole_field(m.position, m.moment, r).norm();
  return total / static_cast<double>(points.size());
}

double field_objective(const MagnetArrangement& arrangement, const std::vector<Vec3>& points) {
  return field_objective(arrangement.magnets, points);
}

double superposed_field_norm(const std::vector<Magnet>& magnets, const std::vector<Vec3>& points) {
  if (points.empty()) throw std::invalid_argument("observation set must not be empty");
  double total = 0.0;
  for (const Vec3& r : points) {
    Vec3 b = Vec3::Zero();
    for (const Magnet& m : magnets) b += dipole_field(m.position, m.moment, r);
    total += b.norm();
  }
  return total / static_cast<double>(points.size());
}

std::vector<Vec3> docking_lattice(int layers, int magnets_per_layer, double radius, double pitch) {
  if (layers < 1 || magnets_per_layer < 2 || magnets_per_layer % 2 != 0)
    throw std::invalid_argument("lattice needs layers >= 1 and an even magnet count per layer");
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(layers * magnets_per_layer));
  for (int l = 0; l < layers; ++l) {
    for (int k = 0; k < magnets_per_layer; ++k) {
      const double a = 2.0 * std::numbers::pi * k / magnets_per_layer;
      out.emplace_back(radius * std::cos(a), radius * std::sin(a), l * pitch);
    }
  }
  return out;
}

std::vector<Vec3> observation_ring(const LatticeSpec& spec, int samples) {
  check_spec(spec);
  if (samples < 1) throw std::invalid_argument("observation ring needs at least one sample");
  std::vector<Vec3> out;
  const double r = spec.radius + 1e-3;
  for (int l = 0; l < spec.layers; ++l) {
    for (int k = 0; k < samples; ++k) {
      const double a = 2.0 * std::numbers::pi * k / samples;
      out.emplace_back(r * std::cos(a), r * std::sin(a), l * spec.pitch);
    }
  }
  return out;
}

MagnetArrangement make_arrangement(const LatticeSpec& spec, int layers, const std::vector<int>& orientation) {
  check_spec(spec);
  if (layers < 1 || layers > spec.layers || orientation.size() != static_cast<std::size_t>(layers))
    throw std::invalid_argument("one orientation per layer within the lattice is required");
  MagnetArrangement a;
  a.layers = layers;
  a.magnets_per_layer = spec.magnets_per_layer;
  a.orientation = orientation;
  const std::vector<Vec3> pos = docking_lattice(layers, spec.magnets_per_layer, spec.radius, spec.pitch);
  const int m = spec.magnets_per_layer;
  for (int l = 0; l < layers; ++l) {
    for (int k = 0; k < m; ++k) {
      const int o = orientation[static_cast<std::size_t>(l)];
      a.magnets.push_back({pos[static_cast<std::size_t>(l * m + k)],
                           spec.magnitude * orientation_axis(k < m / 2 ? o : opposite_orientation(o))});
    }
  }
  return a;
}

std::vector<Magnet> uniform_baseline(const LatticeSpec& spec, int layers) {
  check_spec(spec);
  std::vector<Magnet> out;
  for (const Vec3& p : docking_lattice(layers, spec.magnets_per_layer, spec.radius, spec.pitch))
    out.push_back({p, spec.magnitude * Vec3::UnitZ()});
  return out;
}

ArrangementSearch optimize_arrangement(const LatticeSpec& spec, const std::vector<Vec3>& points, double b_desired,
                                       std::uint64_t seed) {
  check_spec(spec);
  const Eigen::MatrixXd table = layer_table(spec, points);
  std::mt19937_64 rng(seed);
  ArrangementSearch out;
  for (int layers = 1; layers <= spec.layers; ++layers) {
    std::vector<int> best;
    if (layers <= kExhaustiveLayers) {
      BranchAndBound bb(table, layers);
      bb.run(0, 0.0);
      out.evaluations += bb.nodes;
      best = bb.best;
    } else {
      best = hill_climb(table, layers, rng, out.evaluations);
    }
    out.best = make_arrangement(spec, layers, best);
    out.history.push_back(field_objective(out.best, points));
    if (out.history.back() >= b_desired) {
      out.target_reached = true;
      break;
    }
  }
  return out;
}

}  // namespace mars
