#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fluidnet/kernel.hpp"
#include "fluidnet/matrix.hpp"
#include "fluidnet/measures.hpp"
#include "fluidnet/path_field.hpp"

namespace fluidnet {

/// A function of u in [0,1] used for arrival/service rates and initial
/// queue profiles. JSON: a number, {"type":"constant","value":c},
/// {"type":"linear","a":a,"b":b} (a + b u) or
/// {"type":"blocks","breaks":[...],"values":[...]}.
class Profile {
 public:
  Profile(double c = 0.0);  // NOLINT(google-explicit-constructor): numbers are constant profiles
  static Profile from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  double operator()(double u) const;
  /// Values at the cell midpoints of `cells` cells.
  std::vector<double> at_midpoints(std::size_t cells) const;
  /// Values at the right endpoints (i+1)/N.
  std::vector<double> at_endpoints(std::size_t n) const;

 private:
  std::string type_ = "constant";
  double a_ = 0.0, b_ = 0.0;
  std::vector<double> breaks_, values_;
};

/// Finite open network: N stations, external arrival rates lambda_i, service
/// rates mu_i and routing probabilities P(i,j); the row deficit is p_exit(i).
struct NetworkSpec {
  std::vector<double> lambda;
  std::vector<double> mu;
  SquareMatrix P;
  /// Largest admissible self-routing probability p_ii.
  double self_loop_cap = 0.5;

  std::size_t size() const noexcept { return lambda.size(); }
  double p_exit(std::size_t i) const { return std::max(0.0, 1.0 - P.row_sum(i)); }
  /// Throws DomainError when any model assumption fails.
  void validate() const;

  static NetworkSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ScalingConfig {
  double alpha = 1.0;
  double T = 1.0;
  double dt = 0.01;

  double scale(std::size_t n) const;
  /// Simulation horizon N^alpha T.
  double horizon(std::size_t n) const { return scale(n) * T; }
  TimeGrid fluid_grid() const { return TimeGrid::over(T, dt); }
};

struct EventCounts {
  std::vector<std::uint64_t> arrivals, services, routed_in, exits;
  std::uint64_t total = 0;
};

/// One simulated trajectory, sampled on a grid of unscaled times.
struct SamplePath {
  /// Q_i(t_j) and I_i(t_j); stations are cells.
  PathField Q;
  PathField I;
  std::vector<std::int64_t> initial;
  std::vector<std::int64_t> final_state;
  EventCounts counts;
  double horizon = 0.0;
  /// Per station (time, queue after the jump); filled only on request.
  std::vector<std::vector<std::pair<double, std::int64_t>>> jumps;

  /// B_i(t_j) = t_j - I_i(t_j).
  PathField busy() const;
};

struct SimOptions {
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
  /// Sampling grid in unscaled time; must not extend beyond the horizon.
  TimeGrid grid{1, 1.0};
  bool record_jumps = false;
  std::uint64_t max_events = 2'000'000'000ULL;
};

/// Exact CTMC simulation on [0, horizon]: total rate sum(lambda) +
/// sum_{Q_i > 0} mu_i, exponential holding times, event chosen in proportion
/// to its rate; a service at i routes to j with probability P(i,j) and
/// leaves with probability p_exit(i).
SamplePath simulate(const NetworkSpec& spec, const std::vector<std::int64_t>& q0, double horizon,
                    const SimOptions& opts);

struct ScaledPaths {
  PathField Q;
  PathField I;
};
/// Qbar_i(t) = Q_i(N^alpha t) / N^alpha, same for I; the path must have been
/// sampled on the grid N^alpha * cfg.fluid_grid().
ScaledPaths fluid_scale(const SamplePath& path, const ScalingConfig& cfg);

/// Q_i(0) = round(N^alpha q0((i+1)/N)).
std::vector<std::int64_t> initial_queues(const Profile& q0, std::size_t n, double alpha);

/// P(i,j) = G((i+1)/N, (j+1)/N) / N, lambda_i = lambda((i+1)/N), mu_i = mu((i+1)/N).
NetworkSpec spec_from_kernel(const Kernel& g, const Profile& lambda, const Profile& mu, std::size_t n);

/// nu^N: one atom of weight 1/N per station path.
AtomSet empirical_measure(const PathField& scaled_q);

/// Stable 64-bit FNV-1a hash of a JSON document's compact dump.
std::uint64_t json_hash(const nlohmann::json& j);

}  // namespace fluidnet
