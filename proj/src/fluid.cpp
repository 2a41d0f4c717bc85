#include "fluidnet/fluid.hpp"

#include <algorithm>
#include <cmath>

#include "fluidnet/error.hpp"
#include "fluidnet/measures.hpp"

namespace fluidnet {

using nlohmann::json;

void FluidSpec::validate(std::size_t cells) const {
  if (cells == 0) throw DomainError("fluid: zero cells");
  for (double v : q0.at_midpoints(cells))
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("fluid: q0 must be finite and >= 0");
  for (double v : lambda.at_midpoints(cells))
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("fluid: lambda must be finite and >= 0");
  for (double v : mu.at_midpoints(cells))
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("fluid: mu must be finite and > 0");
  const auto verdict = reflection_class_check(transpose(G));
  if (!verdict.in_class_R) throw DomainError("fluid: G^T is not in the reflection class");
}

FluidSpec FluidSpec::from_json(const json& j) {
  FluidSpec s;
  s.G = make_kernel(j.at("kernel"));
  s.lambda = Profile::from_json(j.at("lambda"));
  s.mu = Profile::from_json(j.at("mu"));
  s.q0 = Profile::from_json(j.at("q0"));
  return s;
}

json FluidSpec::to_json() const {
  return json{{"kernel", G.to_json()}, {"lambda", lambda.to_json()}, {"mu", mu.to_json()}, {"q0", q0.to_json()}};
}

PathField build_free_process(const FluidSpec& spec, std::size_t cells, const TimeGrid& grid) {
  const auto q0 = spec.q0.at_midpoints(cells);
  const auto lam = spec.lambda.at_midpoints(cells);
  const auto mu = spec.mu.at_midpoints(cells);
  const auto inflow = apply_grid(operator_grid(transpose(spec.G), cells), mu);
  PathField x(cells, grid);
  for (std::size_t u = 0; u < cells; ++u) {
    const double drift = lam[u] - mu[u] + inflow[u];
    auto row = x.cell(u);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = q0[u] + drift * grid.time(j);
  }
  return x;
}

namespace {

PathField divide_rows(const PathField& y, const std::vector<double>& mu) {
  PathField out = y;
  for (std::size_t i = 0; i < out.cells(); ++i)
    for (double& v : out.cell(i)) v /= mu[i];
  return out;
}

}  // namespace

FluidSolution fluid_limit(const FluidSpec& spec, std::size_t cells, const TimeGrid& grid, const SolverOptions& opts) {
  spec.validate(cells);
  FluidSolution out;
  out.Xbar = build_free_process(spec, cells, grid);
  out.mu = spec.mu.at_midpoints(cells);
  out.solver = reflect(out.Xbar, transpose(spec.G), opts);
  out.Qbar = out.solver.clamped_Z();
  out.Ybar = out.solver.Y;
  out.Ibar = divide_rows(out.Ybar, out.mu);
  out.complementarity = complementarity_residual(out.Qbar, out.Ibar);
  return out;
}

PathField intermediate_free_process(const NetworkSpec& net, const std::vector<double>& q0, const TimeGrid& grid) {
  net.validate();
  const std::size_t n = net.size();
  if (q0.size() != n) throw DomainError("intermediate: q0 has the wrong length");
  PathField x(n, grid);
  for (std::size_t i = 0; i < n; ++i) {
    double inflow = 0.0;
    for (std::size_t j = 0; j < n; ++j) inflow += net.P(j, i) * net.mu[j];
    const double drift = net.lambda[i] + inflow - net.mu[i];
    auto row = x.cell(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = q0[i] + drift * grid.time(k);
  }
  return x;
}

IntermediateSolution intermediate_process(const NetworkSpec& net, const std::vector<double>& q0,
                                          const TimeGrid& grid, const SolverOptions& opts) {
  IntermediateSolution out;
  out.X = intermediate_free_process(net, q0, grid);
  out.solver = solve_finite(out.X, net.P, opts);
  if (out.solver.Z.min_value() < -out.solver.feasibility_tol)
    throw SolverError("intermediate: reflected path is infeasible");
  out.Q = out.solver.clamped_Z();
  out.Y = out.solver.Y;
  out.I = divide_rows(out.Y, net.mu);
  return out;
}

PathField lift(const PathField& finite, std::size_t cells) {
  return refine(finite, cells == 0 ? finite.cells() : cells);
}

double coupling_error(const PathField& q, const PathField& qbar) {
  if (!(q.grid() == qbar.grid())) throw GridMismatch("coupling_error: time grids differ");
  if (q.cells() == 0 || qbar.cells() % q.cells() != 0)
    throw GridMismatch("coupling_error: fluid cells must be a multiple of the station count");
  return distance_t1(q, coarsen(qbar, q.cells()));
}

PathField reassemble(const PathField& x, const Kernel& f, const PathField& y) {
  require_same_shape(x, y, "reassemble");
  return x + y - apply_field(f, y);
}

LiftComparison compare_lifted(const FluidSpec& spec, const FluidSolution& fluid, const NetworkSpec& net,
                              const std::vector<double>& q0, const SolverOptions& opts) {
  const std::size_t m = fluid.Qbar.cells();
  const std::size_t n = net.size();
  if (m % n != 0) throw GridMismatch("compare_lifted: fluid cells must be a multiple of N");

  LiftComparison r;
  r.intermediate = intermediate_process(net, q0, fluid.Qbar.grid(), opts);
  const auto qt = lift(r.intermediate.Q, m);
  const auto xt = lift(r.intermediate.X, m);
  r.distance = distance_t1(qt, fluid.Qbar);
  r.dx = distance_t1(xt, fluid.Xbar);

  const auto g1 = Kernel::blockwise(operator_grid(transpose(spec.G), m));
  const auto g2 = Kernel::blockwise(operator_grid(transpose(from_matrix(net.P)), m));
  r.dF = op_norm_difference(g1, g2);

  const auto& c1 = fluid.solver.certificate;
  const auto& c2 = r.intermediate.solver.certificate;
  const double a1 = static_cast<double>(c1.k) / (1.0 - c1.gamma);
  const double a2 = static_cast<double>(c2.k) / (1.0 - c2.gamma);
  const double xn = norm_t1(fluid.Xbar);
  r.bound = (1.0 + 2.0 * a2) * r.dx + (2.0 * a1 * a2 + a1) * xn * r.dF;
  // Each side's Z carries at most twice its certified regulator error, plus
  // the clamp applied to tiny negative values.
  r.slack = 2.0 * (fluid.solver.error_bound + r.intermediate.solver.error_bound) +
            fluid.solver.feasibility_tol + r.intermediate.solver.feasibility_tol +
            1e-12 * (1.0 + xn + norm_t1(xt));
  r.violated = r.distance > r.bound + r.slack;
  return r;
}

}  // namespace fluidnet
