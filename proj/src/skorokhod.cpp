#include "fluidnet/skorokhod.hpp"

#include <algorithm>
#include <cmath>

#include "fluidnet/error.hpp"
#include "fluidnet/measures.hpp"

namespace fluidnet {

namespace {

// [-X + FW]^+ followed by the running maximum in time, cell by cell.
PathField pi_from(const PathField& x, const PathField& fw) {
  PathField out(x.cells(), x.grid());
  for (std::size_t i = 0; i < x.cells(); ++i) {
    auto xs = x.cell(i);
    auto fs = fw.cell(i);
    auto o = out.cell(i);
    double run = 0.0;
    for (std::size_t j = 0; j < o.size(); ++j) {
      run = std::max(run, fs[j] - xs[j]);
      o[j] = run;
    }
  }
  return out;
}

bool dominates(const PathField& a, const PathField& b) {
  const auto da = a.data(), db = b.data();
  for (std::size_t k = 0; k < da.size(); ++k)
    if (da[k] < db[k]) return false;
  return true;
}

void check_start(const PathField& x) {
  if (x.cells() == 0) throw DomainError("reflection: empty field");
  for (std::size_t i = 0; i < x.cells(); ++i)
    if (x(i, 0) < 0.0) throw DomainError("reflection: X(0) must be nonnegative (cell " + std::to_string(i) + ")");
  for (double v : x.data())
    if (!std::isfinite(v)) throw DomainError("reflection: X has non-finite values");
}

// Shared fixed-point loop; `act` applies the reflection operator to a field.
template <class Act>
ReflectionSolution iterate(const PathField& x, Act&& act, const ContractionCertificate& cert,
                           const SolverOptions& opts) {
  check_start(x);
  const double xnorm = norm_t1(x);
  ReflectionSolution sol;
  sol.certificate = cert;
  sol.tol = opts.tol > 0.0 ? opts.tol : 1e-10 * (1.0 + xnorm);
  sol.feasibility_tol = std::max(1e-8 * (1.0 + xnorm), 100.0 * sol.tol);
  std::size_t max_iter = opts.max_iter;
  if (max_iter == 0) {
    const double steps = std::ceil(std::log(1.0 / sol.tol) / std::log(1.0 / cert.gamma));
    max_iter = 10 * cert.k * static_cast<std::size_t>(std::max(1.0, steps));
  }

  PathField w(x.cells(), x.grid());
  for (std::size_t n = 1; n <= max_iter; ++n) {
    PathField next = pi_from(x, act(w));
    if (!dominates(next, w)) sol.monotone = false;
    sol.fixed_point_residual = distance_t1(next, w);
    sol.iterations = n;
    w = std::move(next);
    if (sol.fixed_point_residual <= sol.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.error_bound = sol.fixed_point_residual * cert.inverse_norm_bound;
  if (!sol.converged && opts.throw_on_failure)
    throw SolverError("reflection: no convergence after " + std::to_string(sol.iterations) +
                      " iterations (gap " + std::to_string(sol.fixed_point_residual) + ")");
  sol.Z = x + w - act(w);
  sol.Y = std::move(w);
  return sol;
}

SquareMatrix checked_grid(const Kernel& f, std::size_t cells) {
  auto g = operator_grid(f, cells);
  if (g.min_entry() < 0.0) throw DomainError("reflection: kernel takes negative values");
  if (g.max_column_sum() / static_cast<double>(g.size()) > 1.0 + 1e-9)
    throw DomainError("reflection: kernel operator norm exceeds 1");
  return g;
}

void require_feasible(const ReflectionSolution& sol) {
  const double lo = sol.Z.min_value();
  if (lo < -sol.feasibility_tol)
    throw SolverError("reflection: Z reaches " + std::to_string(lo) + " below the feasibility tolerance");
}

}  // namespace

PathField ReflectionSolution::clamped_Z() const {
  PathField out = Z;
  for (double& v : out.data())
    if (v < 0.0 && v > -feasibility_tol) v = 0.0;
  return out;
}

PathField pi_map(const PathField& x, const Kernel& f, const PathField& w) {
  require_same_shape(x, w, "pi_map");
  return pi_from(x, apply_field(f, w));
}

ReflectionSolution solve_regulator(const PathField& x, const Kernel& f, const SolverOptions& opts) {
  const auto g = checked_grid(f, x.cells());
  const auto cert = bounded_parameters(Kernel::blockwise(g), opts.gamma);
  return iterate(x, [&g](const PathField& w) { return apply_grid_field(g, w); }, cert, opts);
}

ReflectionSolution reflect(const PathField& x, const Kernel& f, const SolverOptions& opts) {
  auto sol = solve_regulator(x, f, opts);
  require_feasible(sol);
  return sol;
}

ContractionCertificate matrix_certificate(const SquareMatrix& p, double gamma, std::size_t cap) {
  if (p.min_entry() < 0.0) throw DomainError("matrix_certificate: negative entry");
  std::vector<double> r(p.size(), 1.0);
  for (std::size_t k = 1; k <= cap; ++k) {
    r = multiply(p, r);
    const double norm = r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
    if (norm <= gamma) return make_certificate(gamma, k, norm);
  }
  throw SolverError("matrix_certificate: no k <= " + std::to_string(cap) + " with ||(P^T)^k|| <= gamma");
}

ReflectionSolution solve_finite(const PathField& x, const SquareMatrix& p, const SolverOptions& opts) {
  if (p.size() != x.cells()) throw GridMismatch("solve_finite: routing matrix size differs from station count");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.row_sum(i) > 1.0 + 1e-12) throw DomainError("solve_finite: routing matrix row sum exceeds 1");
  const auto cert = matrix_certificate(p, opts.gamma);
  auto act = [&p](const PathField& w) {
    PathField out(w.cells(), w.grid());
    for (std::size_t j = 0; j < p.size(); ++j) {
      auto src = w.cell(j);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p(j, i);
        if (a == 0.0) continue;
        auto dst = out.cell(i);
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += a * src[t];
      }
    }
    return out;
  };
  auto sol = iterate(x, act, cert, opts);
  require_feasible(sol);
  return sol;
}

std::vector<double> complementarity_residual(const PathField& z, const PathField& y) {
  require_same_shape(z, y, "complementarity_residual");
  std::vector<double> out(z.cells(), 0.0);
  for (std::size_t i = 0; i < z.cells(); ++i) {
    auto zs = z.cell(i);
    auto ys = y.cell(i);
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < zs.size(); ++j) s += std::max(zs[j], 0.0) * (ys[j + 1] - ys[j]);
    out[i] = s;
  }
  return out;
}

std::vector<double> complementarity_residual(const ReflectionSolution& sol) {
  return complementarity_residual(sol.Z, sol.Y);
}

double max_step_increment(const PathField& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < y.cells(); ++i) {
    auto c = y.cell(i);
    for (std::size_t j = 1; j < c.size(); ++j) m = std::max(m, c[j] - c[j - 1]);
  }
  return m;
}

LipschitzReport lipschitz_check(const Kernel& f, const PathField& x1, const PathField& x2,
                                const ContractionCertificate& cert, const SolverOptions& opts) {
  require_same_shape(x1, x2, "lipschitz_check");
  const auto s1 = solve_regulator(x1, f, opts);
  const auto s2 = solve_regulator(x2, f, opts);
  LipschitzReport r;
  r.dx = distance_t1(x1, x2);
  r.dpsi = distance_t1(s1.Y, s2.Y);
  r.dphi = distance_t1(s1.Z, s2.Z);
  r.psi_bound = cert.psi_lipschitz * r.dx;
  r.phi_bound = cert.phi_lipschitz * r.dx;
  // Each solver is within error_bound of its fixed point; Z moves with (1 + ||F||) Y.
  const double rounding = 1e-12 * (1.0 + norm_t1(x1) + norm_t1(x2));
  r.slack = 2.0 * (s1.error_bound + s2.error_bound) + rounding;
  r.violated = r.dpsi > r.psi_bound + r.slack || r.dphi > r.phi_bound + r.slack;
  return r;
}

PerturbationReport operator_perturbation_check(const Kernel& f1, const Kernel& f2, const PathField& x1,
                                               const PathField& x2, const SolverOptions& opts) {
  require_same_shape(x1, x2, "operator_perturbation_check");
  const std::size_t m = x1.cells();
  const auto g1 = Kernel::blockwise(checked_grid(f1, m));
  const auto g2 = Kernel::blockwise(checked_grid(f2, m));
  const auto c1 = bounded_parameters(g1, opts.gamma);
  const auto c2 = bounded_parameters(g2, opts.gamma);
  const auto s1 = solve_regulator(x1, g1, opts);
  const auto s2 = solve_regulator(x2, g2, opts);

  PerturbationReport r;
  r.dx = distance_t1(x1, x2);
  r.dF = op_norm_difference(g1, g2);
  r.dpsi = distance_t1(s1.Y, s2.Y);
  r.dphi = distance_t1(s1.Z, s2.Z);
  const double k1 = static_cast<double>(c1.k), k2 = static_cast<double>(c2.k);
  const double a1 = k1 / (1.0 - c1.gamma), a2 = k2 / (1.0 - c2.gamma);
  const double x1n = norm_t1(x1);
  r.psi_bound = a2 * r.dx + a1 * a2 * x1n * r.dF;
  r.phi_bound = (1.0 + 2.0 * a2) * r.dx + (2.0 * a1 * a2 + a1) * x1n * r.dF;
  const double rounding = 1e-12 * (1.0 + x1n + norm_t1(x2));
  r.slack = 2.0 * (s1.error_bound + s2.error_bound) + rounding;
  r.violated = r.dpsi > r.psi_bound + r.slack || r.dphi > r.phi_bound + r.slack;
  return r;
}

PerturbationReport operator_perturbation_check(const Kernel& f1, const Kernel& f2, const PathField& x,
                                               const SolverOptions& opts) {
  return operator_perturbation_check(f1, f2, x, x, opts);
}

}  // namespace fluidnet
