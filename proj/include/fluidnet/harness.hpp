#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fluidnet/fluid.hpp"
#include "fluidnet/measures.hpp"
#include "fluidnet/network.hpp"

namespace fluidnet {

inline constexpr int kStudySchemaVersion = 1;

struct FunctionalRequest {
  std::string name;
  double parameter = 0.0;
};

/// Study configuration (JSON schema_version 1):
///   {"schema_version": 1, "kernel": {...}, "lambda": ..., "mu": ..., "q0": ...,
///    "alpha": 1, "T": 2, "dt": 0.01, "N": [16, 64, 256], "replications": 30,
///    "seed": 1, "M": 256, "output_dir": "out",
///    "functionals": [{"name": "running_max", "parameter": 0.25}, {"name": "path_integral"}],
///    "w1": true, "threads": 0, "slope_tolerance": 0.15}
/// M = 0 (or absent) selects max(max N, 256).
struct StudyConfig {
  nlohmann::json kernel = {{"family", "constant"}, {"params", {{"c", 0.0}}}};
  Profile lambda{1.0};
  Profile mu{2.0};
  Profile q0{1.0};
  double alpha = 1.0;
  double T = 2.0;
  double dt = 0.01;
  std::vector<std::size_t> N{16, 64, 256};
  std::size_t replications = 30;
  std::uint64_t seed = 1;
  std::size_t M = 0;
  std::string output_dir;
  std::vector<FunctionalRequest> functionals{{"running_max", 0.25}, {"path_integral", 0.0}};
  bool w1 = true;
  /// 0 uses the hardware concurrency.
  std::size_t threads = 0;
  /// Accepted slope window is -alpha/2 +- slope_tolerance.
  double slope_tolerance = 0.15;

  std::size_t fluid_cells() const;
  ScalingConfig scaling() const { return {alpha, T, dt}; }
  FluidSpec fluid_spec() const;
  /// Throws DomainError / GridMismatch.
  void validate() const;

  static StudyConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RateFit {
  bool defined = false;
  double slope = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual in log space.
  double residual = 0.0;
  std::size_t used = 0;
  /// Inputs dropped for a nonpositive error.
  std::vector<std::size_t> dropped;
};

/// Least squares of log(error) on log(N). Needs at least three points.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

/// One simulated replication at one N.
struct ReplicationRecord {
  std::size_t N = 0;
  std::size_t replication = 0;
  /// (1/N) sum_i max_t |Qbar^N_i - cell average of Qbar|.
  double coupling_error = 0.0;
  /// ||Qbar^N - Qbreve^N||_{T,1} on the N stations.
  double sim_vs_intermediate = 0.0;
  /// ||Xbar^N - Xbreve^N||_{T,1} with Xbar^N recovered from the path.
  double x_deviation = 0.0;
  double w1 = 0.0;
  /// |E_{nu^N} f - E_{nubar} f| per requested functional.
  std::vector<double> functional_errors;
  std::uint64_t events = 0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

struct StudyRow {
  std::size_t N = 0;
  std::string error;  // non-empty when this N failed
  MeanSe coupling;
  MeanSe w1;
  MeanSe sim_vs_intermediate;
  MeanSe x_deviation;
  /// ||(G^N)^T - G^T||_op on the fluid grid.
  double op_gap = 0.0;
  /// Exactly 0: the lift of the intermediate system is the identity on storage.
  double lift_term = 0.0;
  /// ||Qtilde^N - Qbar||_{T,1} and its certified bound.
  double intermediate_vs_fluid = 0.0;
  double intermediate_bound = 0.0;
  bool intermediate_violated = false;
  /// Noise bound 2 T^{1/2} N^{-alpha/2} sqrt(||lambda||_1 + 2||mu||_1) and its
  /// image under the certified Lipschitz constant of the finite reflection map.
  double noise_bound_x = 0.0;
  double noise_bound_q = 0.0;
  double finite_phi = 0.0;
  bool noise_bound_violated = false;
  std::vector<MeanSe> functional_errors;
  std::size_t dual_bound_violations = 0;
  /// sum of the three terms >= total - Monte Carlo error.
  bool decomposition_ok = true;
  double events_mean = 0.0;
};

struct Check {
  std::string name;
  /// Empty when the check does not apply.
  std::optional<bool> passed;
  std::string detail;
};

struct ConvergenceReport {
  StudyConfig config;
  std::size_t fluid_cells = 0;
  std::vector<double> fluid_functionals;
  std::vector<StudyRow> rows;
  std::vector<ReplicationRecord> records;
  RateFit fit;
  RateFit w1_fit;
  std::vector<Check> checks;

  bool passed() const;
  nlohmann::json summary_json() const;
};

ConvergenceReport run_convergence_study(const StudyConfig& cfg);

struct IntermediateRow {
  std::size_t N = 0;
  double distance = 0.0;
  double coarse_distance = 0.0;
  double dx = 0.0;
  double op_gap = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool violated = false;
};

struct IntermediateReport {
  std::vector<IntermediateRow> rows;
  RateFit fit;
  bool decreasing = false;
  bool bounds_hold = false;
  nlohmann::json to_json() const;
};

/// Deterministic sweep of ||Qtilde^N - Qbar||_{T,1} over cfg.N (no simulation).
IntermediateReport run_intermediate_study(const StudyConfig& cfg);

struct BoundRow {
  std::size_t N = 0;
  double lhs_x = 0.0;
  double rhs_x = 0.0;
  double lhs_q = 0.0;
  double rhs_q = 0.0;
  bool violated = false;
};

/// Noise-term bounds per N; runs the simulation part of the study.
std::vector<BoundRow> verify_bounds(const StudyConfig& cfg);
/// Same, read off an existing report.
std::vector<BoundRow> bound_rows(const ConvergenceReport& report);

/// Writes records.ndjson, summary.json and summary.csv into `dir`.
void write_report(const ConvergenceReport& report, const std::string& dir);

}  // namespace fluidnet
