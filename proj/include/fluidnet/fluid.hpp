#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "fluidnet/kernel.hpp"
#include "fluidnet/network.hpp"
#include "fluidnet/path_field.hpp"
#include "fluidnet/skorokhod.hpp"

namespace fluidnet {

/// Inputs of the infinite-dimensional fluid model. Profiles are sampled at
/// the cell midpoints of the fluid resolution.
struct FluidSpec {
  Profile q0;
  Profile lambda;
  Profile mu{1.0};
  Kernel G = constant_kernel(0.0);

  /// Checks q0, lambda >= 0 and mu > 0 on the cells, and that G^T is in R.
  void validate(std::size_t cells) const;

  /// {"kernel": {...}, "lambda": ..., "mu": ..., "q0": ...}
  static FluidSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct FluidSolution {
  PathField Xbar;
  PathField Qbar;
  PathField Ybar;
  PathField Ibar;
  /// Service rates on the cells (Ybar = mu * Ibar).
  std::vector<double> mu;
  ReflectionSolution solver;
  /// Per-cell complementarity residual sum_j Q(t_j) (I(t_{j+1}) - I(t_j)).
  std::vector<double> complementarity;
};

/// X_u(t) = q0(u) + (lambda(u) - mu(u) + (G^T mu)(u)) t on `cells` cells,
/// with G^T applied on the same grid the reflection solver uses.
PathField build_free_process(const FluidSpec& spec, std::size_t cells, const TimeGrid& grid);

/// Qbar = Phi_{G^T}(Xbar), Ybar = Psi_{G^T}(Xbar), Ibar = Ybar / mu.
FluidSolution fluid_limit(const FluidSpec& spec, std::size_t cells, const TimeGrid& grid,
                          const SolverOptions& opts = {});

/// The deterministic N-station system with the noise removed.
struct IntermediateSolution {
  PathField X;
  PathField Q;
  PathField Y;
  PathField I;
  ReflectionSolution solver;
};

/// X_i(t) = q0_i + (lambda_i + sum_j P_ji mu_j - mu_i) t.
PathField intermediate_free_process(const NetworkSpec& net, const std::vector<double>& q0, const TimeGrid& grid);
IntermediateSolution intermediate_process(const NetworkSpec& net, const std::vector<double>& q0,
                                          const TimeGrid& grid, const SolverOptions& opts = {});

/// Blockwise embedding of N station paths into a field on `cells` cells
/// (a multiple of N; default N).
PathField lift(const PathField& finite, std::size_t cells = 0);

/// (1/N) sum_i max_j |q_i(t_j) - N \int_{K_i} Qbar_u(t_j) du| for one path.
/// Needs qbar.cells() to be a multiple of q.cells() and a common time grid.
double coupling_error(const PathField& q, const PathField& qbar);

/// Right-hand side of X + (1 - F) Y, recomputed independently of the solver.
PathField reassemble(const PathField& x, const Kernel& f, const PathField& y);

/// Comparison of the lifted intermediate system with the fluid
/// limit: both solved on `fluid.Qbar.cells()` cells, bound from certificates.
struct LiftComparison {
  /// ||Qtilde - Qbar||_{T,1}.
  double distance = 0.0;
  /// ||Xtilde - Xbar||_{T,1}.
  double dx = 0.0;
  /// ||(G^N)^T - G^T||_op on the fluid grid.
  double dF = 0.0;
  /// Certified bound (1 + 2a2) dx + (2 a1 a2 + a1) ||Xbar|| dF.
  double bound = 0.0;
  double slack = 0.0;
  bool violated = false;
  IntermediateSolution intermediate;
};
LiftComparison compare_lifted(const FluidSpec& spec, const FluidSolution& fluid, const NetworkSpec& net,
                              const std::vector<double>& q0, const SolverOptions& opts = {});

}  // namespace fluidnet
