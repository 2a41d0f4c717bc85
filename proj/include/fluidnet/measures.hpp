#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fluidnet/path_field.hpp"

namespace fluidnet {

/// ||x||_{T,1} = (1/M) sum_u max_j |x_u(t_j)|.
double norm_t1(const PathField& x);
/// ||a - b||_{T,1} without materialising the difference.
double distance_t1(const PathField& a, const PathField& b);
/// max_j |p(t_j) - q(t_j)|.
double sup_metric(std::span<const double> p, std::span<const double> q);

/// Finitely supported probability measure on grid paths.
struct AtomSet {
  TimeGrid grid;
  std::vector<std::vector<double>> atoms;
  std::vector<double> weights;

  std::size_t size() const noexcept { return atoms.size(); }
  /// Throws DomainError/GridMismatch on bad weights or path lengths.
  void validate() const;
};

/// One equal-weight atom per cell path of the field.
AtomSet atoms_from_field(const PathField& f);

struct TransportEntry {
  std::size_t from = 0;
  std::size_t to = 0;
  double mass = 0.0;
};

struct TransportResult {
  double cost = 0.0;
  std::vector<TransportEntry> plan;
  std::size_t augmentations = 0;
};

/// Exact W1 between two atom sets under the sup metric. Solved as a
/// transportation problem by successive shortest paths (Dijkstra with
/// potentials on the dense bipartite residual graph); O((n+m)^2) per
/// augmentation, at most a few (n+m) augmentations in practice.
TransportResult wasserstein1(const AtomSet& a, const AtomSet& b);
/// Same on a precomputed cost matrix (row-major, a.size() x b.size()).
TransportResult transport(std::span<const double> wa, std::span<const double> wb, std::span<const double> cost);

enum class FunctionalKind { running_max, path_integral, projection };

struct FunctionalSpec {
  FunctionalKind kind = FunctionalKind::running_max;
  /// Hinge level a in h(x) = (x - a)^+ for running_max.
  double level = 0.0;
  /// Evaluation time for projection.
  double time = 0.0;
};

struct FunctionalValue {
  double value = 0.0;
  /// Lipschitz constant of the functional in the sup metric on [0,T].
  double lipschitz = 1.0;
  /// Projection time was not a grid point (nearest grid point used).
  bool off_grid = false;
};

FunctionalSpec parse_functional(const std::string& name, double parameter = 0.0);
double functional_value(std::span<const double> path, const TimeGrid& grid, const FunctionalSpec& spec);
FunctionalValue functional_average(const AtomSet& a, const FunctionalSpec& spec);

}  // namespace fluidnet
