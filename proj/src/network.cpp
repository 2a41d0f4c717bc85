#include "fluidnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "fluidnet/error.hpp"
#include "fluidnet/rng.hpp"

namespace fluidnet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Profile

Profile::Profile(double c) : a_(c) {}

Profile Profile::from_json(const json& j) {
  if (j.is_number()) return Profile(j.get<double>());
  if (!j.is_object()) throw DomainError("profile must be a number or an object");
  Profile p;
  p.type_ = j.value("type", std::string("constant"));
  if (p.type_ == "constant") {
    p.a_ = j.at("value").get<double>();
  } else if (p.type_ == "linear") {
    p.a_ = j.at("a").get<double>();
    p.b_ = j.at("b").get<double>();
  } else if (p.type_ == "blocks") {
    p.breaks_ = j.at("breaks").get<std::vector<double>>();
    p.values_ = j.at("values").get<std::vector<double>>();
    if (p.values_.size() != p.breaks_.size() + 1) throw DomainError("blocks profile: one value per block");
    if (!std::is_sorted(p.breaks_.begin(), p.breaks_.end())) throw DomainError("blocks profile: unsorted breaks");
  } else {
    throw DomainError("unknown profile type '" + p.type_ + "'");
  }
  return p;
}

json Profile::to_json() const {
  if (type_ == "constant") return json{{"type", "constant"}, {"value", a_}};
  if (type_ == "linear") return json{{"type", "linear"}, {"a", a_}, {"b", b_}};
  return json{{"type", "blocks"}, {"breaks", breaks_}, {"values", values_}};
}

double Profile::operator()(double u) const {
  if (type_ == "constant") return a_;
  if (type_ == "linear") return a_ + b_ * u;
  const auto k = std::lower_bound(breaks_.begin(), breaks_.end(), u) - breaks_.begin();
  return values_[static_cast<std::size_t>(k)];
}

std::vector<double> Profile::at_midpoints(std::size_t cells) const {
  std::vector<double> v(cells);
  for (std::size_t i = 0; i < cells; ++i) v[i] = (*this)((static_cast<double>(i) + 0.5) / static_cast<double>(cells));
  return v;
}

std::vector<double> Profile::at_endpoints(std::size_t n) const {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (*this)(static_cast<double>(i + 1) / static_cast<double>(n));
  return v;
}

// ---------------------------------------------------------------------------
// NetworkSpec

void NetworkSpec::validate() const {
  const std::size_t n = lambda.size();
  if (n == 0) throw DomainError("network: no stations");
  if (mu.size() != n || P.size() != n) throw DomainError("network: lambda, mu and P sizes differ");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lambda[i] >= 0.0) || !std::isfinite(lambda[i])) throw DomainError("network: lambda must be finite and >= 0");
    if (!(mu[i] > 0.0) || !std::isfinite(mu[i])) throw DomainError("network: mu must be finite and > 0");
  }
  if (P.min_entry() < 0.0) throw DomainError("network: negative routing probability");
  bool open = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = P.row_sum(i);
    if (s > 1.0 + 1e-12) throw DomainError("network: routing row " + std::to_string(i) + " sums above 1");
    if (1.0 - s > 1e-12) open = true;
    if (P(i, i) > self_loop_cap)
      throw DomainError("network: self-routing probability p_ii = " + std::to_string(P(i, i)) +
                        " exceeds the cap (the p_ii = O(1) regime is not supported)");
  }
  if (!open) throw DomainError("network: no station has a positive exit probability");
  if (perron_root(P).value >= 1.0 - 1e-12) throw DomainError("network: spectral radius of P is not below 1");
}

NetworkSpec NetworkSpec::from_json(const json& j) {
  NetworkSpec s;
  const auto n = j.contains("N") ? j.at("N").get<std::size_t>() : j.at("lambda").size();
  auto vec = [n](const json& v, const char* what) {
    if (v.is_number()) return std::vector<double>(n, v.get<double>());
    auto out = v.get<std::vector<double>>();
    if (out.size() != n) throw DomainError(std::string("network: '") + what + "' has the wrong length");
    return out;
  };
  s.lambda = vec(j.at("lambda"), "lambda");
  s.mu = vec(j.at("mu"), "mu");
  s.P = SquareMatrix::from_rows(j.at("P").get<std::vector<std::vector<double>>>());
  s.self_loop_cap = j.value("self_loop_cap", 0.5);
  s.validate();
  return s;
}

json NetworkSpec::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < P.size(); ++i) {
    auto r = P.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return json{{"N", size()}, {"lambda", lambda}, {"mu", mu}, {"P", rows}, {"self_loop_cap", self_loop_cap}};
}

double ScalingConfig::scale(std::size_t n) const { return std::pow(static_cast<double>(n), alpha); }

PathField SamplePath::busy() const {
  PathField b(I.cells(), I.grid());
  for (std::size_t i = 0; i < I.cells(); ++i)
    for (std::size_t j = 0; j < I.points(); ++j) b(i, j) = I.grid().time(j) - I(i, j);
  return b;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

// Binary indexed tree over nonnegative weights with prefix search.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0.0), w_(n, 0.0) {
    top_ = 1;
    while (top_ * 2 <= n) top_ *= 2;
  }

  void set(std::size_t i, double w) {
    const double delta = w - w_[i];
    w_[i] = w;
    total_ += delta;
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
    if (++updates_ % 65536 == 0) rebuild();
  }

  double total() const noexcept { return total_; }
  double weight(std::size_t i) const noexcept { return w_[i]; }

  /// Smallest index whose inclusive prefix sum exceeds x.
  std::size_t find(double x) const {
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step /= 2) {
      if (pos + step < tree_.size() && tree_[pos + step] <= x) {
        pos += step;
        x -= tree_[pos];
      }
    }
    return std::min(pos, w_.size() - 1);
  }

 private:
  // Clears accumulated rounding from long add/subtract sequences.
  void rebuild() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    total_ = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      total_ += w_[i];
      for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += w_[i];
    }
  }

  std::vector<double> tree_, w_;
  std::size_t top_ = 1;
  double total_ = 0.0;
  std::uint64_t updates_ = 0;
};

}  // namespace

SamplePath simulate(const NetworkSpec& spec, const std::vector<std::int64_t>& q0, double horizon,
                    const SimOptions& opts) {
  spec.validate();
  const std::size_t n = spec.size();
  if (q0.size() != n) throw DomainError("simulate: initial state has the wrong length");
  for (auto q : q0)
    if (q < 0) throw DomainError("simulate: negative initial queue");
  if (!(horizon >= 0.0)) throw DomainError("simulate: negative horizon");
  const TimeGrid grid = opts.grid;
  if (grid.horizon() > horizon * (1.0 + 1e-12) + 1e-12)
    throw DomainError("simulate: sampling grid extends beyond the horizon");

  CounterRng rng(opts.seed, opts.replication, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double lambda_total = std::accumulate(spec.lambda.begin(), spec.lambda.end(), 0.0);
  std::optional<std::discrete_distribution<std::size_t>> arrival_pick;
  if (lambda_total > 0.0) arrival_pick.emplace(spec.lambda.begin(), spec.lambda.end());
  std::vector<std::discrete_distribution<std::size_t>> route;
  route.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(spec.P.row(i).begin(), spec.P.row(i).end());
    w.push_back(spec.p_exit(i));
    route.emplace_back(w.begin(), w.end());
  }

  SamplePath path;
  path.horizon = horizon;
  path.initial = q0;
  path.Q = PathField(n, grid);
  path.I = PathField(n, grid);
  path.counts.arrivals.assign(n, 0);
  path.counts.services.assign(n, 0);
  path.counts.routed_in.assign(n, 0);
  path.counts.exits.assign(n, 0);
  if (opts.record_jumps) path.jumps.assign(n, {});

  std::vector<std::int64_t> q = q0;
  std::vector<double> idle(n, 0.0), empty_since(n, 0.0);
  Fenwick service(n);
  for (std::size_t i = 0; i < n; ++i)
    if (q[i] > 0) service.set(i, spec.mu[i]);

  auto change = [&](std::size_t i, std::int64_t delta, double now) {
    const bool was_empty = q[i] == 0;
    q[i] += delta;
    if (was_empty && q[i] > 0) {
      idle[i] += now - empty_since[i];
      service.set(i, spec.mu[i]);
    } else if (!was_empty && q[i] == 0) {
      empty_since[i] = now;
      service.set(i, 0.0);
    }
    if (opts.record_jumps) path.jumps[i].emplace_back(now, q[i]);
  };

  std::size_t next_sample = 0;
  auto record_until = [&](double t_next) {
    while (next_sample < grid.points() && grid.time(next_sample) < t_next) {
      const double s = grid.time(next_sample);
      for (std::size_t i = 0; i < n; ++i) {
        path.Q(i, next_sample) = static_cast<double>(q[i]);
        path.I(i, next_sample) = idle[i] + (q[i] == 0 ? s - empty_since[i] : 0.0);
      }
      ++next_sample;
    }
  };

  double now = 0.0;
  for (;;) {
    const double rate = lambda_total + std::max(service.total(), 0.0);
    const double t_next = rate > 0.0 ? now + std::exponential_distribution<double>(rate)(rng)
                                     : std::numeric_limits<double>::infinity();
    record_until(std::min(t_next, std::nextafter(horizon, std::numeric_limits<double>::infinity())));
    if (t_next > horizon) break;
    now = t_next;
    if (++path.counts.total > opts.max_events) throw SolverError("simulate: event cap exceeded");

    double x = unit(rng) * rate;
    if (x < lambda_total) {
      const std::size_t i = (*arrival_pick)(rng);
      ++path.counts.arrivals[i];
      change(i, +1, now);
      continue;
    }
    x -= lambda_total;
    std::size_t i = service.find(x);
    if (q[i] == 0) {
      // Rounding placed x past the last busy station; take the last busy one.
      while (i > 0 && q[i] == 0) --i;
      if (q[i] == 0) continue;
    }
    ++path.counts.services[i];
    change(i, -1, now);
    const std::size_t dest = route[i](rng);
    if (dest == n) {
      ++path.counts.exits[i];
    } else {
      ++path.counts.routed_in[dest];
      change(dest, +1, now);
    }
  }
  record_until(std::numeric_limits<double>::infinity());
  path.final_state = q;
  return path;
}

ScaledPaths fluid_scale(const SamplePath& path, const ScalingConfig& cfg) {
  const std::size_t n = path.Q.cells();
  const double s = cfg.scale(n);
  const TimeGrid fluid = cfg.fluid_grid();
  const TimeGrid& g = path.Q.grid();
  if (path.horizon < s * cfg.T * (1.0 - 1e-12)) throw DomainError("fluid_scale: simulation horizon shorter than N^alpha T");
  if (g.steps != fluid.steps || std::abs(g.dt - s * fluid.dt) > 1e-9 * g.dt)
    throw GridMismatch("fluid_scale: path was not sampled on the scaled fluid grid");
  ScaledPaths out{PathField(n, fluid), PathField(n, fluid)};
  for (std::size_t k = 0; k < path.Q.data().size(); ++k) {
    out.Q.data()[k] = path.Q.data()[k] / s;
    out.I.data()[k] = path.I.data()[k] / s;
  }
  return out;
}

std::vector<std::int64_t> initial_queues(const Profile& q0, std::size_t n, double alpha) {
  const double s = std::pow(static_cast<double>(n), alpha);
  std::vector<std::int64_t> q(n);
  const auto v = q0.at_endpoints(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] < 0.0) throw DomainError("initial profile must be nonnegative");
    q[i] = std::llround(s * v[i]);
  }
  return q;
}

NetworkSpec spec_from_kernel(const Kernel& g, const Profile& lambda, const Profile& mu, std::size_t n) {
  if (n == 0) throw DomainError("spec_from_kernel: N must be positive");
  NetworkSpec s;
  s.P = SquareMatrix(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += (s.P(i, j) = g(static_cast<double>(i + 1) * w, static_cast<double>(j + 1) * w) * w);
    if (row > 1.0 + 1e-12)
      throw DomainError("spec_from_kernel: row " + std::to_string(i) + " of the sampled routing matrix sums to " +
                        std::to_string(row) + " > 1");
  }
  s.lambda = lambda.at_endpoints(n);
  s.mu = mu.at_endpoints(n);
  s.validate();
  return s;
}

AtomSet empirical_measure(const PathField& scaled_q) { return atoms_from_field(scaled_q); }

std::uint64_t json_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fluidnet
