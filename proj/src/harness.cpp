#include "fluidnet/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "fluidnet/error.hpp"
#include "fluidnet/rng.hpp"

namespace fluidnet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

std::size_t StudyConfig::fluid_cells() const {
  if (M != 0) return M;
  const std::size_t nmax = N.empty() ? 0 : *std::max_element(N.begin(), N.end());
  return std::max<std::size_t>(nmax, 256);
}

FluidSpec StudyConfig::fluid_spec() const {
  FluidSpec s;
  s.G = make_kernel(kernel);
  s.lambda = lambda;
  s.mu = mu;
  s.q0 = q0;
  return s;
}

void StudyConfig::validate() const {
  if (N.empty()) throw DomainError("study: empty N list");
  if (N.front() == 0) throw DomainError("study: N must be positive");
  for (std::size_t k = 1; k < N.size(); ++k)
    if (N[k] <= N[k - 1]) throw DomainError("study: N list must be strictly increasing");
  if (replications == 0) throw DomainError("study: replications must be >= 1");
  if (!(alpha > 0.0)) throw DomainError("study: alpha must be > 0");
  if (!(T > 0.0)) throw DomainError("study: T must be > 0");
  (void)TimeGrid::over(T, dt);
  if (!(slope_tolerance >= 0.0)) throw DomainError("study: slope_tolerance must be >= 0");
  const std::size_t m = fluid_cells();
  for (auto n : N)
    if (m % n != 0)
      throw GridMismatch("study: fluid cells M = " + std::to_string(m) + " is not a multiple of N = " + std::to_string(n));
  for (const auto& f : functionals) (void)parse_functional(f.name, f.parameter);
  fluid_spec().validate(m);
}

StudyConfig StudyConfig::from_json(const json& j) {
  if (!j.contains("schema_version")) throw DomainError("study config: missing schema_version");
  const int version = j.at("schema_version").get<int>();
  if (version != kStudySchemaVersion)
    throw DomainError("study config: unsupported schema_version " + std::to_string(version));
  StudyConfig c;
  if (j.contains("kernel")) c.kernel = j.at("kernel");
  if (j.contains("lambda")) c.lambda = Profile::from_json(j.at("lambda"));
  if (j.contains("mu")) c.mu = Profile::from_json(j.at("mu"));
  if (j.contains("q0")) c.q0 = Profile::from_json(j.at("q0"));
  c.alpha = j.value("alpha", c.alpha);
  c.T = j.value("T", c.T);
  c.dt = j.value("dt", c.dt);
  if (j.contains("N")) c.N = j.at("N").get<std::vector<std::size_t>>();
  c.replications = j.value("replications", c.replications);
  c.seed = j.value("seed", c.seed);
  c.M = j.value("M", c.M);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("functionals")) {
    c.functionals.clear();
    for (const auto& f : j.at("functionals"))
      c.functionals.push_back({f.at("name").get<std::string>(), f.value("parameter", 0.0)});
  }
  c.w1 = j.value("w1", c.w1);
  c.threads = j.value("threads", c.threads);
  c.slope_tolerance = j.value("slope_tolerance", c.slope_tolerance);
  return c;
}

json StudyConfig::to_json() const {
  json fs = json::array();
  for (const auto& f : functionals) fs.push_back({{"name", f.name}, {"parameter", f.parameter}});
  return json{{"schema_version", kStudySchemaVersion},
              {"kernel", kernel},
              {"lambda", lambda.to_json()},
              {"mu", mu.to_json()},
              {"q0", q0.to_json()},
              {"alpha", alpha},
              {"T", T},
              {"dt", dt},
              {"N", N},
              {"replications", replications},
              {"seed", seed},
              {"M", fluid_cells()},
              {"output_dir", output_dir},
              {"functionals", fs},
              {"w1", w1},
              {"threads", threads},
              {"slope_tolerance", slope_tolerance}};
}

// ---------------------------------------------------------------------------
// Statistics

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw DomainError("fit_rate: need at least three points");
  RateFit fit;
  std::vector<double> x, y;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto [n, e] = points[k];
    if (!(n > 0.0)) throw DomainError("fit_rate: N must be positive");
    if (!(e > 0.0) || !std::isfinite(e)) {
      fit.dropped.push_back(k);
      continue;
    }
    x.push_back(std::log(n));
    y.push_back(std::log(e));
  }
  fit.used = x.size();
  if (x.size() < 2) return fit;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx == 0.0) return fit;
  fit.defined = true;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - (fit.intercept + fit.slope * x[k]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(x.size()));
  return fit;
}

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Study

namespace {

json to_json(const MeanSe& m) { return json{{"mean", m.mean}, {"se", m.se}}; }

json to_json(const RateFit& f) {
  json j{{"defined", f.defined}, {"used", f.used}, {"dropped", f.dropped}};
  if (f.defined) {
    j["slope"] = f.slope;
    j["intercept"] = f.intercept;
    j["residual"] = f.residual;
  } else {
    j["slope"] = nullptr;
  }
  return j;
}

json to_json(const ReplicationRecord& r) {
  return json{{"N", r.N},
              {"replication", r.replication},
              {"coupling_error", r.coupling_error},
              {"sim_vs_intermediate", r.sim_vs_intermediate},
              {"x_deviation", r.x_deviation},
              {"w1", r.w1},
              {"functional_errors", r.functional_errors},
              {"events", r.events}};
}

std::string fmt17(double x) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return buf.data();
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs body(k) for k in [0, jobs) on a small pool; results must be written
// to per-k slots, so the outcome does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t jobs, std::size_t threads, Body&& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs;) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = worker_count(threads, jobs);
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

double profile_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1])) return false;
  return true;
}

// Xbar^N = Qbar^N - (1 - P^T)(mu Ibar^N): the free process the simulated
// path reflects, noise included.
PathField recovered_free_process(const PathField& q, const PathField& idle, const NetworkSpec& net) {
  const std::size_t n = q.cells();
  PathField y = idle;
  for (std::size_t i = 0; i < n; ++i)
    for (double& v : y.cell(i)) v *= net.mu[i];
  PathField x = q - y;
  for (std::size_t j = 0; j < n; ++j) {
    const auto yj = y.cell(j);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = net.P(j, i);
      if (p == 0.0) continue;
      auto xi = x.cell(i);
      for (std::size_t t = 0; t < xi.size(); ++t) xi[t] += p * yj[t];
    }
  }
  return x;
}

}  // namespace

ConvergenceReport run_convergence_study(const StudyConfig& cfg) {
  cfg.validate();
  ConvergenceReport rep;
  rep.config = cfg;
  const std::size_t m = cfg.fluid_cells();
  rep.fluid_cells = m;
  const TimeGrid grid = TimeGrid::over(cfg.T, cfg.dt);
  const FluidSpec fs = cfg.fluid_spec();
  const FluidSolution fluid = fluid_limit(fs, m, grid);
  const AtomSet nubar = atoms_from_field(fluid.Qbar);

  std::vector<FunctionalSpec> funcs;
  std::vector<double> lipschitz;
  for (const auto& f : cfg.functionals) {
    funcs.push_back(parse_functional(f.name, f.parameter));
    const auto v = functional_average(nubar, funcs.back());
    rep.fluid_functionals.push_back(v.value);
    lipschitz.push_back(v.lipschitz);
  }

  const ScalingConfig sc = cfg.scaling();
  for (const std::size_t n : cfg.N) {
    StudyRow row;
    row.N = n;
    try {
      const NetworkSpec net = spec_from_kernel(fs.G, cfg.lambda, cfg.mu, n);
      const auto q0 = initial_queues(cfg.q0, n, cfg.alpha);
      const double s = sc.scale(n);
      std::vector<double> q0bar(n);
      for (std::size_t i = 0; i < n; ++i) q0bar[i] = static_cast<double>(q0[i]) / s;

      const LiftComparison cmp = compare_lifted(fs, fluid, net, q0bar);
      const IntermediateSolution& inter = cmp.intermediate;
      row.op_gap = cmp.dF;
      row.intermediate_vs_fluid = cmp.distance;
      row.intermediate_bound = cmp.bound;
      row.intermediate_violated = cmp.violated;
      row.finite_phi = inter.solver.certificate.phi_lipschitz;
      row.noise_bound_x = 2.0 * std::sqrt(cfg.T) / std::sqrt(s) *
                          std::sqrt(profile_mean(net.lambda) + 2.0 * profile_mean(net.mu));
      row.noise_bound_q = row.finite_phi * row.noise_bound_x;

      const TimeGrid sim_grid{grid.steps, grid.dt * s};
      const double horizon = std::max(s * cfg.T, sim_grid.horizon());
      const std::uint64_t seed = mix64(cfg.seed ^ mix64(static_cast<std::uint64_t>(n)));

      std::vector<ReplicationRecord> recs(cfg.replications);
      parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
        SimOptions o;
        o.seed = seed;
        o.replication = r;
        o.grid = sim_grid;
        const SamplePath path = simulate(net, q0, horizon, o);
        const ScaledPaths scaled = fluid_scale(path, sc);
        ReplicationRecord& rec = recs[r];
        rec.N = n;
        rec.replication = r;
        rec.events = path.counts.total;
        rec.coupling_error = coupling_error(scaled.Q, fluid.Qbar);
        rec.sim_vs_intermediate = distance_t1(scaled.Q, inter.Q);
        rec.x_deviation = distance_t1(recovered_free_process(scaled.Q, scaled.I, net), inter.X);
        const AtomSet nu = empirical_measure(scaled.Q);
        if (cfg.w1) rec.w1 = wasserstein1(nu, nubar).cost;
        for (std::size_t f = 0; f < funcs.size(); ++f)
          rec.functional_errors.push_back(std::abs(functional_average(nu, funcs[f]).value - rep.fluid_functionals[f]));
      });

      auto column = [&recs](auto member) {
        std::vector<double> v;
        for (const auto& r : recs) v.push_back(static_cast<double>(r.*member));
        return v;
      };
      row.coupling = mean_se(column(&ReplicationRecord::coupling_error));
      row.sim_vs_intermediate = mean_se(column(&ReplicationRecord::sim_vs_intermediate));
      row.x_deviation = mean_se(column(&ReplicationRecord::x_deviation));
      row.w1 = mean_se(column(&ReplicationRecord::w1));
      row.events_mean = mean_se(column(&ReplicationRecord::events)).mean;
      for (std::size_t f = 0; f < funcs.size(); ++f) {
        std::vector<double> v;
        for (const auto& r : recs) {
          v.push_back(r.functional_errors[f]);
          if (cfg.w1 && r.functional_errors[f] > lipschitz[f] * r.w1 + 1e-12 * (1.0 + std::abs(rep.fluid_functionals[f])))
            ++row.dual_bound_violations;
        }
        row.functional_errors.push_back(mean_se(v));
      }
      row.noise_bound_violated = row.x_deviation.mean > row.noise_bound_x || row.sim_vs_intermediate.mean > row.noise_bound_q;
      const double terms = row.sim_vs_intermediate.mean + row.lift_term + row.intermediate_vs_fluid;
      row.decomposition_ok = terms >= row.coupling.mean - row.coupling.se - 1e-12;
      rep.records.insert(rep.records.end(), recs.begin(), recs.end());
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rep.rows.push_back(std::move(row));
  }

  // Aggregate checks over the rows that ran.
  std::vector<const StudyRow*> ok;
  for (const auto& r : rep.rows)
    if (r.error.empty()) ok.push_back(&r);
  auto series = [&ok](auto get) {
    std::vector<double> v;
    for (const auto* r : ok) v.push_back(get(*r));
    return v;
  };
  const auto errors = series([](const StudyRow& r) { return r.coupling.mean; });
  const auto w1s = series([](const StudyRow& r) { return r.w1.mean; });
  std::vector<std::pair<double, double>> pts, wpts;
  for (const auto* r : ok) {
    pts.emplace_back(static_cast<double>(r->N), r->coupling.mean);
    wpts.emplace_back(static_cast<double>(r->N), r->w1.mean);
  }
  if (pts.size() >= 3) {
    rep.fit = fit_rate(pts);
    if (cfg.w1) rep.w1_fit = fit_rate(wpts);
  }
  const bool degenerate = std::all_of(errors.begin(), errors.end(), [](double e) { return e == 0.0; });

  rep.checks.push_back({"all_stages_ran", ok.size() == rep.rows.size(),
                        std::to_string(rep.rows.size() - ok.size()) + " failed N values"});
  if (degenerate) {
    rep.checks.push_back({"coupling_error_decreasing", std::nullopt, "all errors are zero"});
    rep.checks.push_back({"coupling_slope", std::nullopt, "all errors are zero; slope undefined"});
  } else {
    rep.checks.push_back({"coupling_error_decreasing", strictly_decreasing(errors), "strict decrease in N"});
    const double target = -cfg.alpha / 2.0;
    std::optional<bool> slope_ok;
    std::string detail = "slope undefined";
    if (rep.fit.defined) {
      slope_ok = std::abs(rep.fit.slope - target) <= cfg.slope_tolerance;
      detail = "slope " + fmt17(rep.fit.slope) + " vs window [" + fmt17(target - cfg.slope_tolerance) + ", " +
               fmt17(target + cfg.slope_tolerance) + "]";
    }
    rep.checks.push_back({"coupling_slope", slope_ok, detail});
  }
  if (cfg.w1) {
    const bool w1_zero = std::all_of(w1s.begin(), w1s.end(), [](double e) { return e == 0.0; });
    rep.checks.push_back({"w1_decreasing", w1_zero ? std::optional<bool>() : strictly_decreasing(w1s), "strict decrease in N"});
    std::size_t viol = 0;
    for (const auto* r : ok) viol += r->dual_bound_violations;
    rep.checks.push_back({"dual_bound", viol == 0, std::to_string(viol) + " violations of |E f - E f| <= Lip W1"});
  }
  if (!funcs.empty() && ok.size() >= 2) {
    bool conv = true, any = false;
    for (std::size_t f = 0; f < funcs.size(); ++f) {
      const double first = ok.front()->functional_errors[f].mean, last = ok.back()->functional_errors[f].mean;
      if (first == 0.0 && last == 0.0) continue;
      any = true;
      conv = conv && last < first;
    }
    rep.checks.push_back({"functionals_converge", any ? std::optional<bool>(conv) : std::nullopt,
                          "functional error at the largest N below that at the smallest N"});
  }
  bool inter_ok = true, noise_ok = true, decomp_ok = true;
  for (const auto* r : ok) {
    inter_ok = inter_ok && !r->intermediate_violated;
    noise_ok = noise_ok && !r->noise_bound_violated;
    decomp_ok = decomp_ok && r->decomposition_ok;
  }
  rep.checks.push_back({"intermediate_vs_fluid_bound", inter_ok, "certified perturbation bound per N"});
  rep.checks.push_back({"noise_bound", noise_ok, "mean noise deviation below 2 T^1/2 N^-alpha/2 sqrt(|lambda| + 2|mu|)"});
  rep.checks.push_back({"decomposition", decomp_ok, "three terms dominate the total up to Monte Carlo error"});
  return rep;
}

bool ConvergenceReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed.value_or(true); });
}

json ConvergenceReport::summary_json() const {
  json rows_j = json::array();
  for (const auto& r : rows) {
    json f = json::array();
    for (const auto& e : r.functional_errors) f.push_back(to_json(e));
    json j{{"N", r.N}};
    if (!r.error.empty()) {
      j["error"] = r.error;
    } else {
      j.update(json{{"coupling_error", to_json(r.coupling)},
                    {"w1", to_json(r.w1)},
                    {"sim_vs_intermediate", to_json(r.sim_vs_intermediate)},
                    {"x_deviation", to_json(r.x_deviation)},
                    {"op_gap", r.op_gap},
                    {"lift_term", r.lift_term},
                    {"intermediate_vs_fluid", r.intermediate_vs_fluid},
                    {"intermediate_bound", r.intermediate_bound},
                    {"intermediate_violated", r.intermediate_violated},
                    {"noise_bound_x", r.noise_bound_x},
                    {"noise_bound_q", r.noise_bound_q},
                    {"finite_phi", r.finite_phi},
                    {"noise_bound_violated", r.noise_bound_violated},
                    {"functional_errors", f},
                    {"dual_bound_violations", r.dual_bound_violations},
                    {"decomposition_ok", r.decomposition_ok},
                    {"events_mean", r.events_mean}});
    }
    rows_j.push_back(std::move(j));
  }
  json checks_j = json::array();
  for (const auto& c : checks)
    checks_j.push_back({{"name", c.name},
                        {"passed", c.passed ? json(*c.passed) : json(nullptr)},
                        {"detail", c.detail}});
  return json{{"config", config.to_json()},
              {"fluid_cells", fluid_cells},
              {"fluid_functionals", fluid_functionals},
              {"rows", rows_j},
              {"fit", to_json(fit)},
              {"w1_fit", to_json(w1_fit)},
              {"checks", checks_j},
              {"passed", passed()}};
}

// ---------------------------------------------------------------------------
// Deterministic sweep and bounds

IntermediateReport run_intermediate_study(const StudyConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.fluid_cells();
  const TimeGrid grid = TimeGrid::over(cfg.T, cfg.dt);
  const FluidSpec fs = cfg.fluid_spec();
  const FluidSolution fluid = fluid_limit(fs, m, grid);
  IntermediateReport rep;
  rep.rows.resize(cfg.N.size());
  parallel_for(cfg.N.size(), cfg.threads, [&](std::size_t k) {
    const std::size_t n = cfg.N[k];
    const NetworkSpec net = spec_from_kernel(fs.G, cfg.lambda, cfg.mu, n);
    const auto q0 = initial_queues(cfg.q0, n, cfg.alpha);
    const double s = cfg.scaling().scale(n);
    std::vector<double> q0bar(n);
    for (std::size_t i = 0; i < n; ++i) q0bar[i] = static_cast<double>(q0[i]) / s;
    const auto cmp = compare_lifted(fs, fluid, net, q0bar);
    IntermediateRow& r = rep.rows[k];
    r.N = n;
    r.distance = cmp.distance;
    r.coarse_distance = coupling_error(cmp.intermediate.Q, fluid.Qbar);
    r.dx = cmp.dx;
    r.op_gap = cmp.dF;
    r.bound = cmp.bound;
    r.slack = cmp.slack;
    r.violated = cmp.violated;
  });
  std::vector<double> d;
  std::vector<std::pair<double, double>> pts;
  rep.bounds_hold = true;
  for (const auto& r : rep.rows) {
    d.push_back(r.distance);
    pts.emplace_back(static_cast<double>(r.N), r.distance);
    rep.bounds_hold = rep.bounds_hold && !r.violated;
  }
  rep.decreasing = strictly_decreasing(d);
  if (pts.size() >= 3) rep.fit = fit_rate(pts);
  return rep;
}

json IntermediateReport::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows)
    rows_j.push_back({{"N", r.N},
                      {"distance", r.distance},
                      {"coarse_distance", r.coarse_distance},
                      {"dx", r.dx},
                      {"op_gap", r.op_gap},
                      {"bound", r.bound},
                      {"slack", r.slack},
                      {"violated", r.violated}});
  return json{{"rows", rows_j}, {"fit", fluidnet::to_json(fit)}, {"decreasing", decreasing}, {"bounds_hold", bounds_hold}};
}

std::vector<BoundRow> bound_rows(const ConvergenceReport& report) {
  std::vector<BoundRow> out;
  for (const auto& r : report.rows) {
    if (!r.error.empty()) continue;
    BoundRow b;
    b.N = r.N;
    b.lhs_x = r.x_deviation.mean;
    b.rhs_x = r.noise_bound_x;
    b.lhs_q = r.sim_vs_intermediate.mean;
    b.rhs_q = r.noise_bound_q;
    b.violated = r.noise_bound_violated;
    out.push_back(b);
  }
  return out;
}

std::vector<BoundRow> verify_bounds(const StudyConfig& cfg) {
  StudyConfig c = cfg;
  c.w1 = false;
  c.functionals.clear();
  const auto report = run_convergence_study(c);
  for (const auto& r : report.rows)
    if (!r.error.empty()) throw SolverError("verify_bounds: N = " + std::to_string(r.N) + ": " + r.error);
  return bound_rows(report);
}

// ---------------------------------------------------------------------------
// Output

void write_report(const ConvergenceReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&dir](const char* name) {
    std::ofstream os(fs::path(dir) / name);
    if (!os) throw DomainError(std::string("cannot write ") + name + " in " + dir);
    return os;
  };
  {
    auto os = open("records.ndjson");
    for (const auto& r : report.records) os << to_json(r).dump() << '\n';
  }
  {
    auto os = open("summary.json");
    os << report.summary_json().dump(2) << '\n';
  }
  auto os = open("summary.csv");
  os << "N,coupling_error,coupling_se,w1,w1_se,sim_vs_intermediate,lift_term,intermediate_vs_fluid,"
        "intermediate_bound,op_gap,x_deviation,noise_bound_x,noise_bound_q";
  for (const auto& f : report.config.functionals) os << ',' << f.name << "_error";
  os << '\n';
  for (const auto& r : report.rows) {
    if (!r.error.empty()) continue;
    os << r.N;
    for (double v : {r.coupling.mean, r.coupling.se, r.w1.mean, r.w1.se, r.sim_vs_intermediate.mean, r.lift_term,
                     r.intermediate_vs_fluid, r.intermediate_bound, r.op_gap, r.x_deviation.mean, r.noise_bound_x,
                     r.noise_bound_q})
      os << ',' << fmt17(v);
    for (const auto& e : r.functional_errors) os << ',' << fmt17(e.mean);
    os << '\n';
  }
}

}  // namespace fluidnet
