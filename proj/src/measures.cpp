#include "fluidnet/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fluidnet/error.hpp"

namespace fluidnet {

double norm_t1(const PathField& x) {
  if (x.cells() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < x.cells(); ++i) {
    double m = 0.0;
    for (double v : x.cell(i)) m = std::max(m, std::abs(v));
    total += m;
  }
  return total / static_cast<double>(x.cells());
}

double distance_t1(const PathField& a, const PathField& b) {
  require_same_shape(a, b, "distance_t1");
  if (a.cells() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.cells(); ++i) total += sup_metric(a.cell(i), b.cell(i));
  return total / static_cast<double>(a.cells());
}

double sup_metric(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw GridMismatch("sup_metric: paths have different lengths");
  double m = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) m = std::max(m, std::abs(p[j] - q[j]));
  return m;
}

void AtomSet::validate() const {
  if (atoms.empty()) throw DomainError("AtomSet: no atoms");
  if (weights.size() != atoms.size()) throw DomainError("AtomSet: one weight per atom required");
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("AtomSet: negative weight");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) throw DomainError("AtomSet: weights sum to " + std::to_string(s));
  for (const auto& a : atoms)
    if (a.size() != grid.points()) throw GridMismatch("AtomSet: atom length differs from the time grid");
}

AtomSet atoms_from_field(const PathField& f) {
  AtomSet a;
  a.grid = f.grid();
  a.atoms.reserve(f.cells());
  for (std::size_t i = 0; i < f.cells(); ++i) a.atoms.emplace_back(f.cell(i).begin(), f.cell(i).end());
  a.weights.assign(f.cells(), 1.0 / static_cast<double>(f.cells()));
  return a;
}

TransportResult transport(std::span<const double> wa, std::span<const double> wb, std::span<const double> cost) {
  const std::size_t n = wa.size(), m = wb.size();
  if (cost.size() != n * m) throw DomainError("transport: cost matrix has the wrong size");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kEps = 1e-15;

  // Nodes: 0 = source, 1..n = supply atoms, n+1..n+m = demand atoms, n+m+1 = sink.
  const std::size_t nodes = n + m + 2, S = 0, T = n + m + 1;
  auto supply = [](std::size_t v) { return v - 1; };
  std::vector<double> rem_a(wa.begin(), wa.end()), rem_b(wb.begin(), wb.end());
  std::vector<double> flow(n * m, 0.0);
  std::vector<double> pot(nodes, 0.0), dist(nodes);
  std::vector<std::size_t> prev(nodes);
  std::vector<char> done(nodes);

  // Residual arcs out of v as (target, reduced cost, capacity).
  auto relax = [&](std::size_t u) {
    auto touch = [&](std::size_t v, double c, double cap) {
      if (cap <= kEps || done[v]) return;
      const double nd = dist[u] + c + pot[u] - pot[v];
      if (nd < dist[v]) {
        dist[v] = nd;
        prev[v] = u;
      }
    };
    if (u == S) {
      for (std::size_t i = 0; i < n; ++i) touch(1 + i, 0.0, rem_a[i]);
    } else if (u <= n) {
      const std::size_t i = supply(u);
      for (std::size_t j = 0; j < m; ++j) touch(n + 1 + j, cost[i * m + j], kInf);
      touch(S, 0.0, wa[i] - rem_a[i]);
    } else if (u < T) {
      const std::size_t j = u - n - 1;
      for (std::size_t i = 0; i < n; ++i) touch(1 + i, -cost[i * m + j], flow[i * m + j]);
      touch(T, 0.0, rem_b[j]);
    } else {
      for (std::size_t j = 0; j < m; ++j) touch(n + 1 + j, 0.0, wb[j] - rem_b[j]);
    }
  };

  TransportResult out;
  double remaining = 0.0;
  for (double w : wa) remaining += w;
  const std::size_t max_aug = 50 * (n + m) * (n + m) + 100;
  while (remaining > 1e-13) {
    if (++out.augmentations > max_aug) throw SolverError("transport: augmentation cap exceeded");
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    dist[S] = 0.0;
    for (;;) {
      std::size_t u = nodes;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < kInf && (u == nodes || dist[v] < dist[u])) u = v;
      if (u == nodes) break;
      done[u] = 1;
      if (u == T) break;
      relax(u);
    }
    if (!(dist[T] < kInf)) break;  // remaining mass is numerical dust
    for (std::size_t v = 0; v < nodes; ++v) pot[v] += std::min(dist[v], dist[T]);

    double push = kInf;
    for (std::size_t v = T; v != S; v = prev[v]) {
      const std::size_t u = prev[v];
      double cap = kInf;
      if (u == S) cap = rem_a[supply(v)];
      else if (v == T) cap = rem_b[u - n - 1];
      else if (u <= n && v > n) cap = kInf;
      else if (u > n && v <= n) cap = flow[supply(v) * m + (u - n - 1)];
      else if (u <= n && v == S) cap = wa[supply(u)] - rem_a[supply(u)];
      else cap = wb[v - n - 1] - rem_b[v - n - 1];  // T -> demand atom
      push = std::min(push, cap);
    }
    for (std::size_t v = T; v != S; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == S) rem_a[supply(v)] -= push;
      else if (v == T) rem_b[u - n - 1] -= push;
      else if (u <= n && v > n) flow[supply(u) * m + (v - n - 1)] += push;
      else if (u > n && v <= n) flow[supply(v) * m + (u - n - 1)] -= push;
      else if (u <= n && v == S) rem_a[supply(u)] += push;
      else rem_b[v - n - 1] += push;
    }
    remaining -= push;
  }

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double f = flow[i * m + j];
      if (f > kEps) {
        out.cost += f * cost[i * m + j];
        out.plan.push_back({i, j, f});
      }
    }
  return out;
}

TransportResult wasserstein1(const AtomSet& a, const AtomSet& b) {
  a.validate();
  b.validate();
  if (!(a.grid == b.grid)) throw GridMismatch("wasserstein1: atom sets live on different time grids");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = sup_metric(a.atoms[i], b.atoms[j]);
  return transport(a.weights, b.weights, cost);
}

FunctionalSpec parse_functional(const std::string& name, double parameter) {
  if (name == "running_max") return {FunctionalKind::running_max, parameter, 0.0};
  if (name == "path_integral") return {FunctionalKind::path_integral, 0.0, 0.0};
  if (name == "projection") return {FunctionalKind::projection, 0.0, parameter};
  throw DomainError("unknown functional '" + name + "'");
}

double functional_value(std::span<const double> path, const TimeGrid& grid, const FunctionalSpec& spec) {
  switch (spec.kind) {
    case FunctionalKind::running_max: {
      const double top = *std::max_element(path.begin(), path.end());
      return std::max(top - spec.level, 0.0);
    }
    case FunctionalKind::path_integral: {
      double s = 0.0;
      for (std::size_t j = 1; j < path.size(); ++j) s += 0.5 * (path[j] + path[j - 1]);
      return s * grid.dt;
    }
    case FunctionalKind::projection:
      return path[grid.nearest(spec.time)];
  }
  return 0.0;
}

FunctionalValue functional_average(const AtomSet& a, const FunctionalSpec& spec) {
  a.validate();
  FunctionalValue out;
  for (std::size_t k = 0; k < a.size(); ++k) out.value += a.weights[k] * functional_value(a.atoms[k], a.grid, spec);
  // The path integral over [0,T] is T-Lipschitz in the sup metric.
  out.lipschitz = spec.kind == FunctionalKind::path_integral ? a.grid.horizon() : 1.0;
  if (spec.kind == FunctionalKind::projection) {
    const double t = a.grid.time(a.grid.nearest(spec.time));
    out.off_grid = std::abs(t - spec.time) > 1e-9 * std::max(1.0, a.grid.horizon());
  }
  return out;
}

}  // namespace fluidnet
