// fluidnet command line: simulate, fluid, measure, converge, skorokhod.
// Exit codes: 0 all checks pass, 2 a bound or check failed, 1 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fluidnet/error.hpp"
#include "fluidnet/fluid.hpp"
#include "fluidnet/harness.hpp"
#include "fluidnet/measures.hpp"
#include "fluidnet/network.hpp"
#include "fluidnet/skorokhod.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fluidnet;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kCheckFailed = 2;

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open " + path);
  return json::parse(is);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

AtomSet load_atoms(const std::string& path) { return atoms_from_field(load(path)); }

json solution_json(const ReflectionSolution& s) {
  return json{{"iterations", s.iterations},
              {"converged", s.converged},
              {"fixed_point_residual", s.fixed_point_residual},
              {"error_bound", s.error_bound},
              {"tol", s.tol},
              {"monotone", s.monotone},
              {"certificate",
               {{"gamma", s.certificate.gamma},
                {"k", s.certificate.k},
                {"psi_lipschitz", s.certificate.psi_lipschitz},
                {"phi_lipschitz", s.certificate.phi_lipschitz}}}};
}

struct SimulateArgs {
  std::string spec, out;
  std::size_t n = 16;
  double alpha = 1.0, T = 1.0, dt = 0.01;
  std::uint64_t seed = 1, replication = 0;
};

int run_simulate(const SimulateArgs& a) {
  const json j = read_json(a.spec);
  NetworkSpec net;
  std::vector<std::int64_t> q0;
  if (j.contains("network")) {
    net = NetworkSpec::from_json(j.at("network"));
    q0 = j.at("q0").get<std::vector<std::int64_t>>();
  } else {
    const FluidSpec fs_spec = FluidSpec::from_json(j);
    net = spec_from_kernel(fs_spec.G, fs_spec.lambda, fs_spec.mu, a.n);
    q0 = initial_queues(fs_spec.q0, a.n, a.alpha);
  }
  const ScalingConfig cfg{a.alpha, a.T, a.dt};
  const std::size_t n = net.size();
  const TimeGrid fg = cfg.fluid_grid();
  SimOptions o;
  o.seed = a.seed;
  o.replication = a.replication;
  o.grid = TimeGrid{fg.steps, fg.dt * cfg.scale(n)};
  const auto path = simulate(net, q0, std::max(cfg.horizon(n), o.grid.horizon()), o);
  const auto scaled = fluid_scale(path, cfg);
  fs::create_directories(a.out);
  save((fs::path(a.out) / "Q.csv").string(), scaled.Q);
  save((fs::path(a.out) / "I.csv").string(), scaled.I);
  write_json(fs::path(a.out) / "run.json",
             json{{"N", n},
                  {"alpha", a.alpha},
                  {"T", a.T},
                  {"dt", a.dt},
                  {"seed", a.seed},
                  {"replication", a.replication},
                  {"events", path.counts.total},
                  {"arrivals", path.counts.arrivals},
                  {"services", path.counts.services},
                  {"final_state", path.final_state},
                  {"spec_hash", json_hash(j)}});
  std::cout << "simulated N=" << n << " events=" << path.counts.total << " -> " << a.out << '\n';
  return kOk;
}

struct FluidArgs {
  std::string spec, out;
  std::size_t M = 256;
  double T = 1.0, dt = 0.01;
};

int run_fluid(const FluidArgs& a) {
  const FluidSpec spec = FluidSpec::from_json(read_json(a.spec));
  const auto sol = fluid_limit(spec, a.M, TimeGrid::over(a.T, a.dt));
  std::ofstream os(a.out);
  if (!os) throw DomainError("cannot write " + a.out);
  // Last column: running Stieltjes sum of Q dI up to t.
  os << "cell_index,t,Q,I,complementarity\n";
  const TimeGrid& g = sol.Qbar.grid();
  for (std::size_t u = 0; u < a.M; ++u) {
    double acc = 0.0;
    for (std::size_t j = 0; j < g.points(); ++j) {
      if (j > 0) acc += std::max(sol.Qbar(u, j - 1), 0.0) * (sol.Ibar(u, j) - sol.Ibar(u, j - 1));
      os << u << ',' << g17(g.time(j)) << ',' << g17(sol.Qbar(u, j)) << ',' << g17(sol.Ibar(u, j)) << ',' << g17(acc)
         << '\n';
    }
  }
  double worst = 0.0;
  for (double r : sol.complementarity) worst = std::max(worst, r);
  std::cout << "fluid M=" << a.M << " iterations=" << sol.solver.iterations << " error_bound=" << g17(sol.solver.error_bound)
            << " max_complementarity=" << g17(worst) << '\n';
  return kOk;
}

struct MeasureArgs {
  std::string a, b, metric = "w1", plan, functional;
  double parameter = 0.0;
};

int run_measure(const MeasureArgs& m) {
  const AtomSet a = load_atoms(m.a);
  if (m.metric == "w1") {
    if (m.b.empty()) throw DomainError("measure: --b is required for w1");
    const auto r = wasserstein1(a, load_atoms(m.b));
    std::cout << g17(r.cost) << '\n';
    if (!m.plan.empty()) {
      std::ofstream os(m.plan);
      if (!os) throw DomainError("cannot write " + m.plan);
      os << "from,to,mass\n";
      for (const auto& e : r.plan) os << e.from << ',' << e.to << ',' << g17(e.mass) << '\n';
    }
  } else if (m.metric == "norm") {
    std::cout << g17(norm_t1(load(m.a))) << '\n';
  } else if (m.metric == "functional") {
    const auto v = functional_average(a, parse_functional(m.functional, m.parameter));
    std::cout << g17(v.value) << (v.off_grid ? " (off grid)" : "") << '\n';
  } else {
    throw DomainError("measure: unknown metric '" + m.metric + "'");
  }
  return kOk;
}

struct ConvergeArgs {
  std::string config, out;
  bool intermediate = false;
  std::size_t threads = 0;
};

int run_converge(const ConvergeArgs& a) {
  StudyConfig cfg = StudyConfig::from_json(read_json(a.config));
  if (a.threads != 0) cfg.threads = a.threads;
  const std::string out = !a.out.empty() ? a.out : cfg.output_dir;
  if (out.empty()) throw DomainError("converge: no output directory (--out or output_dir)");
  fs::create_directories(out);
  if (a.intermediate) {
    const auto r = run_intermediate_study(cfg);
    write_json(fs::path(out) / "intermediate.json", r.to_json());
    for (const auto& row : r.rows)
      std::cout << "N=" << row.N << " distance=" << g17(row.distance) << " bound=" << g17(row.bound)
                << " op_gap=" << g17(row.op_gap) << (row.violated ? " VIOLATED" : "") << '\n';
    std::cout << "decreasing=" << r.decreasing << " bounds_hold=" << r.bounds_hold << '\n';
    return r.decreasing && r.bounds_hold ? kOk : kCheckFailed;
  }
  const auto report = run_convergence_study(cfg);
  write_report(report, out);
  for (const auto& row : report.rows) {
    if (!row.error.empty()) {
      std::cout << "N=" << row.N << " failed: " << row.error << '\n';
      continue;
    }
    std::cout << "N=" << row.N << " error=" << g17(row.coupling.mean) << " se=" << g17(row.coupling.se)
              << " w1=" << g17(row.w1.mean) << " op_gap=" << g17(row.op_gap) << '\n';
  }
  if (report.fit.defined) std::cout << "slope=" << g17(report.fit.slope) << '\n';
  for (const auto& c : report.checks)
    std::cout << (c.passed ? (*c.passed ? "PASS " : "FAIL ") : "N/A  ") << c.name << ": " << c.detail << '\n';
  return report.passed() ? kOk : kCheckFailed;
}

struct SkorokhodArgs {
  std::string x, kernel, out;
  double tol = 0.0;
};

int run_skorokhod(const SkorokhodArgs& a) {
  const PathField x = load(a.x);
  const Kernel f = make_kernel(read_json(a.kernel));
  SolverOptions opts;
  opts.tol = a.tol;
  opts.throw_on_failure = false;
  const auto sol = solve_regulator(x, f, opts);
  fs::create_directories(a.out);
  save((fs::path(a.out) / "Z.csv").string(), sol.clamped_Z());
  save((fs::path(a.out) / "Y.csv").string(), sol.Y);
  json d = solution_json(sol);
  const auto comp = complementarity_residual(sol);
  d["complementarity"] = comp;
  d["min_Z"] = sol.Z.min_value();
  d["feasible"] = sol.Z.min_value() >= -sol.feasibility_tol;
  write_json(fs::path(a.out) / "diagnostics.json", d);
  std::cout << "iterations=" << sol.iterations << " converged=" << sol.converged
            << " error_bound=" << g17(sol.error_bound) << '\n';
  return sol.converged && d["feasible"].get<bool>() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fluid limits of growing open Jackson networks"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate one replication and write fluid-scaled paths");
  s->add_option("--spec", sim.spec, "fluid spec JSON, or {\"network\": {...}, \"q0\": [...]}")->required();
  s->add_option("--N", sim.n, "number of stations (fluid spec only)");
  s->add_option("--alpha", sim.alpha);
  s->add_option("--T", sim.T);
  s->add_option("--dt", sim.dt);
  s->add_option("--seed", sim.seed);
  s->add_option("--replication", sim.replication);
  s->add_option("--out", sim.out)->required();

  FluidArgs fl;
  auto* f = app.add_subcommand("fluid", "Solve the fluid limit and write Q, I and complementarity as CSV");
  f->add_option("--spec", fl.spec)->required();
  f->add_option("--M", fl.M);
  f->add_option("--T", fl.T);
  f->add_option("--dt", fl.dt);
  f->add_option("--out", fl.out)->required();

  MeasureArgs me;
  auto* m = app.add_subcommand("measure", "W1 between atom sets, T,1 norm, or a functional average");
  m->add_option("--a", me.a, "path-field CSV/bin; each cell is one equal-weight atom")->required();
  m->add_option("--b", me.b);
  m->add_option("--metric", me.metric)->check(CLI::IsMember({"w1", "norm", "functional"}));
  m->add_option("--plan", me.plan, "write the optimal coupling as CSV");
  m->add_option("--functional", me.functional)->check(CLI::IsMember({"running_max", "path_integral", "projection"}));
  m->add_option("--parameter", me.parameter, "hinge level or projection time");

  ConvergeArgs cv;
  auto* c = app.add_subcommand("converge", "Run a convergence study");
  c->add_option("--config", cv.config)->required();
  c->add_option("--out", cv.out);
  c->add_flag("--intermediate", cv.intermediate, "deterministic sweep only (no simulation)");
  c->add_option("--threads", cv.threads);

  SkorokhodArgs sk;
  auto* k = app.add_subcommand("skorokhod", "Solve Z = X + (1 - F) Y for a path field X");
  k->add_option("--x", sk.x)->required();
  k->add_option("--kernel", sk.kernel)->required();
  k->add_option("--out", sk.out)->required();
  k->add_option("--tol", sk.tol);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*s) return run_simulate(sim);
    if (*f) return run_fluid(fl);
    if (*m) return run_measure(me);
    if (*c) return run_converge(cv);
    if (*k) return run_skorokhod(sk);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kRuntimeError;
}
