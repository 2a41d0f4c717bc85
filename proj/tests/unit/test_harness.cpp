#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluidnet/error.hpp"
#include "fluidnet/harness.hpp"

using namespace fluidnet;
using nlohmann::json;

namespace {

StudyConfig small_mm1() {
  StudyConfig c;
  c.N = {4, 16, 64};
  c.M = 64;
  c.replications = 6;
  c.T = 2.0;
  c.dt = 0.05;
  c.threads = 1;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const Check& find_check(const ConvergenceReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return c;
  FAIL("missing check " << name);
  return r.checks.front();
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("fit_rate examples") {
    std::vector<std::pair<double, double>> exact;
    for (double n : {4.0, 16.0, 64.0, 256.0}) exact.emplace_back(n, 3.0 / std::sqrt(n));
    auto f = fit_rate(exact);
    CHECK(f.defined);
    CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.residual <= 1e-12);

    auto flat = fit_rate({{4, 0.2}, {16, 0.2}, {64, 0.2}});
    CHECK(std::abs(flat.slope) <= 1e-15);

    // Closed-form least squares on three points with equally spaced log N.
    const double h = std::log(4.0);
    const double oracle = (std::log(0.26) - std::log(1.0)) / (2.0 * h);
    auto g = fit_rate({{4, 1.0}, {16, 0.51}, {64, 0.26}});
    CHECK(g.slope == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(g.slope == doctest::Approx(-0.486).epsilon(1e-3));

    auto d = fit_rate({{4, 1.0}, {16, 0.0}, {64, 0.25}, {256, -1.0}});
    CHECK(d.dropped == std::vector<std::size_t>{1, 3});
    CHECK(d.used == 2);
    CHECK(d.slope == doctest::Approx(-0.5));
    CHECK_FALSE(fit_rate({{4, 0.0}, {16, 0.0}, {64, 1.0}}).defined);
    CHECK_THROWS_AS(fit_rate({{4, 1.0}, {16, 0.5}}), DomainError);
  }

  TEST_CASE("mean and standard error") {
    auto m = mean_se({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == 2.5);
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(mean_se({7.0}).se == 0.0);
  }

  TEST_CASE("config JSON round trip and validation") {
    auto c = small_mm1();
    c.kernel = json{{"family", "constant"}, {"params", {{"c", 0.5}}}};
    c.lambda = Profile(0.25);
    auto back = StudyConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK_NOTHROW(back.validate());

    CHECK_THROWS_AS(StudyConfig::from_json(json{{"N", {4, 8, 16}}}), DomainError);
    CHECK_THROWS_AS(StudyConfig::from_json(json{{"schema_version", 2}}), DomainError);
    StudyConfig bad = c;
    bad.N = {16, 8, 32};
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = c;
    bad.M = 48;
    CHECK_THROWS_AS(bad.validate(), GridMismatch);
    bad = c;
    bad.replications = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    StudyConfig dflt;
    dflt.N = {16, 64, 512};
    CHECK(dflt.fluid_cells() == 512);
    dflt.N = {8, 16};
    CHECK(dflt.fluid_cells() == 256);
  }

  TEST_CASE("deterministic-equivalent study reports zero error and no rate") {
    auto c = small_mm1();
    c.lambda = Profile(0.0);
    c.q0 = Profile(0.0);
    auto r = run_convergence_study(c);
    for (const auto& row : r.rows) {
      CHECK(row.error.empty());
      CHECK(row.coupling.mean == 0.0);
      CHECK(row.w1.mean == 0.0);
    }
    CHECK_FALSE(r.fit.defined);
    CHECK_FALSE(find_check(r, "coupling_slope").passed.has_value());
    CHECK(r.passed());
    for (const auto& b : bound_rows(r)) {
      CHECK(b.lhs_q == 0.0);
      CHECK(b.lhs_q <= b.rhs_q);
    }
  }

  TEST_CASE("study decomposition and exact lift term") {
    auto r = run_convergence_study(small_mm1());
    REQUIRE(r.rows.size() == 3);
    for (const auto& row : r.rows) {
      CHECK(row.error.empty());
      CHECK(row.lift_term == 0.0);
      CHECK(row.decomposition_ok);
      CHECK(row.dual_bound_violations == 0);
      CHECK(row.coupling.mean <= row.sim_vs_intermediate.mean + row.intermediate_vs_fluid + 1e-12);
    }
    CHECK(r.records.size() == 18);
    // Per replication the triangle inequality is exact.
    for (const auto& rec : r.records) {
      const auto& row = *std::find_if(r.rows.begin(), r.rows.end(), [&](const StudyRow& s) { return s.N == rec.N; });
      CHECK(rec.coupling_error <= rec.sim_vs_intermediate + row.intermediate_vs_fluid + 1e-12);
    }
  }

  TEST_CASE("noise bound shrinks like N^(-alpha/2)") {
    auto b = verify_bounds(small_mm1());
    REQUIRE(b.size() == 3);
    for (std::size_t k = 1; k < b.size(); ++k) CHECK(b[k].rhs_x / b[k - 1].rhs_x == doctest::Approx(0.5));
    for (const auto& row : b) CHECK_FALSE(row.violated);
    auto c = small_mm1();
    c.alpha = 2.0;
    c.T = 1.0;
    c.N = {2, 4, 8};
    c.M = 8;
    auto b2 = verify_bounds(c);
    for (std::size_t k = 1; k < b2.size(); ++k) CHECK(b2[k].rhs_x / b2[k - 1].rhs_x == doctest::Approx(0.5));
  }

  TEST_CASE("outputs are byte-identical across runs and thread counts") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "fluidnet_harness_test";
    fs::remove_all(dir);
    auto c = small_mm1();
    c.replications = 4;
    write_report(run_convergence_study(c), (dir / "a").string());
    c.threads = 3;
    write_report(run_convergence_study(c), (dir / "b").string());
    for (const char* name : {"records.ndjson", "summary.csv"}) CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    // The summary differs only in the recorded thread count.
    auto sa = json::parse(slurp(dir / "a" / "summary.json")), sb = json::parse(slurp(dir / "b" / "summary.json"));
    sa["config"].erase("threads");
    sb["config"].erase("threads");
    CHECK(sa == sb);
    std::size_t lines = 0;
    std::ifstream nd(dir / "a" / "records.ndjson");
    for (std::string l; std::getline(nd, l); ++lines) CHECK(json::parse(l).contains("coupling_error"));
    CHECK(lines == 12);
    c.seed = 99;
    write_report(run_convergence_study(c), (dir / "c").string());
    CHECK(slurp(dir / "a" / "records.ndjson") != slurp(dir / "c" / "records.ndjson"));
    fs::remove_all(dir);
  }

  TEST_CASE("per-N failure is recorded and the study continues") {
    auto c = small_mm1();
    // A kernel whose sampled routing rows exceed one at N = 4 only.
    c.kernel = json{{"family", "block"},
                    {"params", {{"row_breaks", json::array()}, {"col_breaks", {0.74}}, {"values", {{0.8, 1.3}}}}}};
    c.lambda = Profile(0.1);
    auto r = run_convergence_study(c);
    CHECK_FALSE(r.rows[0].error.empty());
    CHECK(r.rows[1].error.empty());
    CHECK(r.rows[2].error.empty());
    CHECK(find_check(r, "all_stages_ran").passed == false);
    CHECK_FALSE(r.passed());
  }

  TEST_CASE("deterministic sweep for a column block kernel") {
    StudyConfig c;
    c.kernel = json{{"family", "block"},
                    {"params", {{"row_breaks", json::array()}, {"col_breaks", {0.49, 0.74}}, {"values", {{0.6, 0.2, 0.4}}}}}};
    c.lambda = Profile(0.5);
    c.mu = Profile(1.0);
    c.q0 = Profile(0.1);
    c.N = {4, 8, 16, 32};
    c.M = 64;
    c.dt = 0.02;
    auto r = run_intermediate_study(c);
    CHECK(r.decreasing);
    CHECK(r.bounds_hold);
    for (const auto& row : r.rows) {
      CHECK(row.coarse_distance <= row.distance + 1e-15);
      CHECK(row.distance <= row.bound + row.slack);
    }
    CHECK(r.to_json()["rows"].size() == 4);
  }
}
