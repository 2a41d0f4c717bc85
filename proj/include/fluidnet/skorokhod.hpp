#pragma once

#include <cstddef>
#include <vector>

#include "fluidnet/kernel.hpp"
#include "fluidnet/matrix.hpp"
#include "fluidnet/path_field.hpp"

namespace fluidnet {

struct SolverOptions {
  /// Stopping gap for ||W_{n+1} - W_n||_{T,1}; <= 0 selects 1e-10 (1 + ||X||_{T,1}).
  double tol = 0.0;
  /// 0 selects 10 k ceil(log(1/tol) / log(1/gamma)).
  std::size_t max_iter = 0;
  /// Contraction level used for the certificate.
  double gamma = 0.5;
  /// Throw SolverError instead of returning a non-converged solution.
  bool throw_on_failure = true;
};

/// Solution of Z = X + (1 - F) Y, Z >= 0, Y increasing and minimal.
struct ReflectionSolution {
  PathField Z;
  PathField Y;
  std::size_t iterations = 0;
  bool converged = false;
  /// Last observed ||W_{n+1} - W_n||_{T,1}.
  double fixed_point_residual = 0.0;
  /// Certified bound on ||Y - W*||_{T,1}: residual * k / (1 - gamma).
  double error_bound = 0.0;
  double tol = 0.0;
  /// Z entries >= -feasibility_tol count as feasible.
  double feasibility_tol = 0.0;
  /// Every iterate dominated its predecessor pointwise.
  bool monotone = true;
  ContractionCertificate certificate;
  /// Z with entries in (-tol, 0) set to 0, for reporting.
  PathField clamped_Z() const;
};

/// pi(W)_u(t_j) = max_{i <= j} [-X_u(t_i) + (F W)_u(t_i)]^+
PathField pi_map(const PathField& x, const Kernel& f, const PathField& w);

/// Monotone fixed-point iteration W_{n+1} = pi(W_n) from W_0 = 0.
ReflectionSolution solve_regulator(const PathField& x, const Kernel& f, const SolverOptions& opts = {});
/// solve_regulator plus a feasibility check on Z.
ReflectionSolution reflect(const PathField& x, const Kernel& f, const SolverOptions& opts = {});
/// Finite problem with reflection matrix P^T: Z_i = X_i + Y_i - sum_j P_ji Y_j.
/// Stations are the cells of `x`.
ReflectionSolution solve_finite(const PathField& x, const SquareMatrix& p, const SolverOptions& opts = {});

/// Certificate for the matrix P^T acting on R^N with the normalised l1 norm;
/// ||(P^T)^k|| is the largest row sum of P^k.
ContractionCertificate matrix_certificate(const SquareMatrix& p, double gamma = 0.5,
                                          std::size_t cap = kMaxCertificatePower);

/// Per-cell left-endpoint Stieltjes sum sum_j Z(t_j) (Y(t_{j+1}) - Y(t_j)),
/// with Z clamped at 0.
std::vector<double> complementarity_residual(const PathField& z, const PathField& y);
std::vector<double> complementarity_residual(const ReflectionSolution& sol);

/// Largest single-step increment of Y over all cells.
double max_step_increment(const PathField& y);

struct LipschitzReport {
  double dx = 0.0;
  double dpsi = 0.0;
  double dphi = 0.0;
  double psi_bound = 0.0;
  double phi_bound = 0.0;
  /// Allowance for the solvers' certified errors.
  double slack = 0.0;
  bool violated = false;
};

/// Checks ||Psi(X1) - Psi(X2)|| <= k/(1-g) ||X1 - X2|| and
/// ||Phi(X1) - Phi(X2)|| <= (1 + 2k/(1-g)) ||X1 - X2||.
LipschitzReport lipschitz_check(const Kernel& f, const PathField& x1, const PathField& x2,
                                const ContractionCertificate& cert, const SolverOptions& opts = {});

struct PerturbationReport {
  double dx = 0.0;
  double dF = 0.0;
  double dpsi = 0.0;
  double dphi = 0.0;
  double psi_bound = 0.0;
  double phi_bound = 0.0;
  double slack = 0.0;
  bool violated = false;
};

/// Perturbation bounds for (F1, X1) -> (F2, X2):
///   ||Psi_F2(X2) - Psi_F1(X1)|| <= k2/(1-g2) dX + k1 k2 ||X1|| dF / ((1-g1)(1-g2))
///   ||Phi_F2(X2) - Phi_F1(X1)|| <= (1 + 2k2/(1-g2)) dX
///        + (2 k1 k2 / ((1-g1)(1-g2)) + k1/(1-g1)) ||X1|| dF
/// with dF = ||F2 - F1||_op measured on the grids the solver uses.
PerturbationReport operator_perturbation_check(const Kernel& f1, const Kernel& f2, const PathField& x1,
                                               const PathField& x2, const SolverOptions& opts = {});
PerturbationReport operator_perturbation_check(const Kernel& f1, const Kernel& f2, const PathField& x,
                                               const SolverOptions& opts = {});

}  // namespace fluidnet
