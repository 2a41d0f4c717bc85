#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fluidnet/error.hpp"
#include "fluidnet/fluid.hpp"
#include "fluidnet/measures.hpp"

using namespace fluidnet;
using nlohmann::json;

namespace {

FluidSpec mm1() {
  FluidSpec s;
  s.q0 = Profile(1.0);
  s.lambda = Profile(1.0);
  s.mu = Profile(2.0);
  return s;
}

double max_abs_diff(const PathField& a, const PathField& b) {
  require_same_shape(a, b, "test");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

Kernel sinusoidal(std::size_t res) {
  return make_kernel(json{{"family", "sinusoidal"}, {"params", {{"a", 0.5}, {"b", 0.3}, {"c", 0.1}}}, {"resolution", res}});
}

// Breaks only across columns, at points with no short binary expansion, so
// the right-endpoint sampling error shrinks with every doubling of N.
Kernel column_block() {
  return make_kernel(json{{"family", "block"},
                          {"params", {{"row_breaks", json::array()},
                                      {"col_breaks", {0.49, 0.74}},
                                      {"values", {{0.6, 0.2, 0.4}}}}}});
}

// A break across rows leaves a whole row strip misassigned at every N.
Kernel row_block() {
  return make_kernel(json{{"family", "block"},
                          {"params", {{"breaks", json::array({0.49})}, {"values", {{0.2, 0.6}, {0.5, 0.1}}}}}});
}

}  // namespace

TEST_SUITE("fluid") {
  TEST_CASE("free process examples") {
    const TimeGrid g = TimeGrid::over(2.0, 0.25);
    auto x = build_free_process(mm1(), 4, g);
    for (std::size_t u = 0; u < 4; ++u)
      for (std::size_t j = 0; j < g.points(); ++j) CHECK(x(u, j) == doctest::Approx(1.0 - g.time(j)).epsilon(1e-15));

    FluidSpec c;
    c.G = constant_kernel(0.5);
    c.mu = Profile(2.0);
    auto xc = build_free_process(c, 8, g);
    for (std::size_t j = 0; j < g.points(); ++j) CHECK(xc(3, j) == doctest::Approx(-g.time(j)));

    // lambda = (1 - G^T) mu cancels the drift.
    FluidSpec bal;
    bal.G = constant_kernel(0.25);
    bal.mu = Profile(4.0);
    bal.lambda = Profile(3.0);
    bal.q0 = Profile::from_json(json{{"type", "linear"}, {"a", 0.5}, {"b", 1.0}});
    auto xb = build_free_process(bal, 8, g);
    for (std::size_t u = 0; u < 8; ++u)
      for (std::size_t j = 0; j < g.points(); ++j) CHECK(xb(u, j) == doctest::Approx(xb(u, 0)).epsilon(1e-15));
  }

  TEST_CASE("validation") {
    FluidSpec s = mm1();
    s.mu = Profile(0.0);
    CHECK_THROWS_AS(s.validate(4), DomainError);
    s = mm1();
    s.G = constant_kernel(1.2);
    CHECK_THROWS_AS(s.validate(4), DomainError);
    CHECK_NOTHROW(FluidSpec::from_json(json{{"kernel", {{"family", "constant"}, {"params", {{"c", 0.5}}}}},
                                            {"lambda", 0.25},
                                            {"mu", 2},
                                            {"q0", {{"type", "constant"}, {"value", 1}}}})
                      .validate(16));
  }

  TEST_CASE("M/M/1 fluid closed form") {
    const TimeGrid g = TimeGrid::over(2.0, 0.01);
    auto sol = fluid_limit(mm1(), 4, g);
    for (std::size_t u = 0; u < 4; ++u)
      for (std::size_t j = 0; j < g.points(); ++j) {
        const double t = g.time(j);
        CHECK(sol.Qbar(u, j) == doctest::Approx(std::max(0.0, 1.0 - t)).epsilon(1e-10));
        CHECK(std::abs(sol.Ibar(u, j) - std::max(0.0, t - 1.0) / 2.0) <= 1e-10);
      }
  }

  TEST_CASE("subcritical start empty stays empty") {
    FluidSpec s;
    s.G = sinusoidal(64);
    s.mu = Profile(2.0);
    s.lambda = Profile(0.3);
    auto sol = fluid_limit(s, 64, TimeGrid::over(1.0, 0.05));
    CHECK(norm_t1(sol.Qbar) <= 1e-12);
    CHECK(sol.Ibar.is_increasing(1e-12));
  }

  TEST_CASE("two-cell swap with unit rates") {
    FluidSpec s;
    s.G = Kernel::blockwise(SquareMatrix::from_rows({{0, 1}, {1, 0}}));
    s.q0 = Profile(0.5);
    s.mu = Profile(1.0);
    const TimeGrid g = TimeGrid::over(2.0, 0.01);
    auto sol = fluid_limit(s, 2, g);
    CHECK(sol.Ibar == sol.Ybar);
    for (std::size_t j = 0; j < g.points(); ++j) {
      const double t = g.time(j);
      CHECK(std::abs(sol.Ybar(0, j) - std::max(0.0, t - 1.0)) <= 1e-8);
      CHECK(std::abs(sol.Qbar(1, j) - std::max(0.0, 0.5 - 0.5 * t)) <= 1e-8);
    }
  }

  TEST_CASE("balance identity reassembles the solution") {
    const std::size_t m = 32;
    FluidSpec s;
    s.G = sinusoidal(m);
    s.mu = Profile::from_json(json{{"type", "linear"}, {"a", 1.0}, {"b", 1.0}});
    s.lambda = Profile(0.4);
    s.q0 = Profile::from_json(json{{"type", "blocks"}, {"breaks", {0.5}}, {"values", {0.2, 1.0}}});
    const TimeGrid g = TimeGrid::over(2.0, 0.02);
    auto sol = fluid_limit(s, m, g);
    const auto mu = s.mu.at_midpoints(m);
    const auto q0 = s.q0.at_midpoints(m);
    double worst = 0.0;
    for (std::size_t u = 0; u < m; ++u) {
      const double uu = (u + 0.5) / m;
      for (std::size_t j = 0; j < g.points(); ++j) {
        const double t = g.time(j);
        double routed = 0.0;
        for (std::size_t v = 0; v < m; ++v) routed += mu[v] * (t - sol.Ibar(v, j)) * s.G((v + 0.5) / m, uu) / m;
        const double q = q0[u] + 0.4 * t - mu[u] * (t - sol.Ibar(u, j)) + routed;
        worst = std::max(worst, std::abs(q - sol.Qbar(u, j)));
      }
    }
    CHECK(worst <= 1e-8);
    CHECK(sol.Ibar.is_increasing(1e-12));
    CHECK(sol.Qbar.min_value() >= 0.0);
    // Idle time accrues only where the queue is (numerically) empty.
    for (std::size_t u = 0; u < m; ++u)
      for (std::size_t j = 0; j + 1 < g.points(); ++j)
        if (sol.Ibar(u, j + 1) - sol.Ibar(u, j) > 1e-9) CHECK(sol.Qbar(u, j) <= 0.05);
    for (double r : sol.complementarity) CHECK(r <= 1e-3);
  }

  TEST_CASE("intermediate process examples") {
    const TimeGrid g = TimeGrid::over(2.0, 0.01);
    NetworkSpec one;
    one.lambda = {1.0};
    one.mu = {2.0};
    one.P = SquareMatrix(1);
    auto a = intermediate_process(one, {1.0}, g);
    auto fl = fluid_limit(mm1(), 1, g);
    CHECK(max_abs_diff(a.Q, fl.Qbar) <= 1e-10);

    NetworkSpec up;
    up.lambda = {3.0, 1.0, 2.5};
    up.mu = {1.0, 1.0, 2.0};
    up.P = SquareMatrix::from_rows({{0, 0.3, 0.3}, {0.2, 0, 0.2}, {0.1, 0.1, 0}});
    auto b = intermediate_process(up, {0.0, 0.1, 0.0}, g);
    CHECK(b.X.is_increasing());
    CHECK(b.Q == b.X);
    CHECK(norm_t1(b.I) == 0.0);

    NetworkSpec swap;
    swap.lambda = {0.0, 0.0};
    swap.mu = {1.0, 1.0};
    swap.P = SquareMatrix::from_rows({{0, 0.5}, {0.5, 0}});
    auto c = intermediate_process(swap, {0.5, 0.5}, g);
    FluidSpec fs;
    fs.G = from_matrix(swap.P);
    fs.q0 = Profile(0.5);
    auto d = fluid_limit(fs, 2, g);
    CHECK(max_abs_diff(c.Q, d.Qbar) <= 1e-8);
    CHECK(max_abs_diff(c.I, d.Ibar) <= 1e-8);
  }

  TEST_CASE("lift") {
    const TimeGrid g{3, 0.5};
    PathField two(2, g);
    for (std::size_t j = 0; j < g.points(); ++j) {
      two(0, j) = 1.5;
      two(1, j) = -2.0;
    }
    auto l = lift(two, 8);
    for (std::size_t u = 0; u < 8; ++u) CHECK(l(u, 2) == (u < 4 ? 1.5 : -2.0));
    CHECK(lift(PathField(3, g, 0.7), 12) == PathField(12, g, 0.7));
    CHECK(coarsen(l, 2) == two);
    CHECK(lift(two) == two);
    CHECK_THROWS_AS(lift(two, 5), GridMismatch);
  }

  TEST_CASE("coupling error") {
    const TimeGrid g = TimeGrid::over(1.0, 0.1);
    FluidSpec s;
    s.G = sinusoidal(16);
    s.mu = Profile(2.0);
    s.q0 = Profile::from_json(json{{"type", "linear"}, {"a", 0.2}, {"b", 1.0}});
    auto sol = fluid_limit(s, 16, g);
    CHECK(coupling_error(sol.Qbar, sol.Qbar) == 0.0);
    CHECK(coupling_error(coarsen(sol.Qbar, 4), sol.Qbar) <= 1e-15);
    PathField shifted = coarsen(sol.Qbar, 4);
    for (double& v : shifted.data()) v += 0.25;
    CHECK(coupling_error(shifted, sol.Qbar) == doctest::Approx(0.25));
    CHECK_THROWS_AS(coupling_error(PathField(3, g), sol.Qbar), GridMismatch);
    CHECK_THROWS_AS(coupling_error(PathField(4, TimeGrid::over(1.0, 0.2)), sol.Qbar), GridMismatch);
  }

  TEST_CASE("lifted intermediate system identity and comparison bound") {
    const std::size_t m = 64;
    const TimeGrid g = TimeGrid::over(2.0, 0.02);
    FluidSpec s;
    s.G = column_block();
    s.lambda = Profile(0.5);
    s.mu = Profile(1.0);
    s.q0 = Profile(0.1);
    auto fl = fluid_limit(s, m, g);
    double prev_dF = 1e9;
    for (std::size_t n : {4u, 8u, 16u, 32u}) {
      auto net = spec_from_kernel(s.G, s.lambda, s.mu, n);
      std::vector<double> q0(n, 0.1);
      auto cmp = compare_lifted(s, fl, net, q0);
      CHECK_FALSE(cmp.violated);
      CHECK(cmp.distance <= cmp.bound + cmp.slack);
      CHECK(cmp.dF < prev_dF);
      prev_dF = cmp.dF;

      // Qtilde = Xtilde + (1 - (G^N)^T) Ytilde on the lifted grid.
      const auto& in = cmp.intermediate;
      auto rhs = reassemble(lift(in.X, m), transpose(from_matrix(net.P)), lift(in.Y, m));
      CHECK(max_abs_diff(rhs, lift(in.Q, m)) <= 1e-8);
      // Comparing at N cells never exceeds the lifted distance.
      CHECK(coupling_error(in.Q, fl.Qbar) <= cmp.distance + 1e-15);
    }
    // At N = M the two notions coincide.
    auto net = spec_from_kernel(s.G, s.lambda, s.mu, m);
    auto cmp = compare_lifted(s, fl, net, std::vector<double>(m, 0.1));
    CHECK(coupling_error(cmp.intermediate.Q, fl.Qbar) == doctest::Approx(cmp.distance).epsilon(1e-14));
  }

  TEST_CASE("row discontinuity keeps the operator gap open") {
    const std::size_t m = 256;
    const auto g = Kernel::blockwise(operator_grid(transpose(row_block()), m));
    for (std::size_t n : {8u, 16u, 32u, 64u}) {
      auto net = spec_from_kernel(row_block(), Profile(0.5), Profile(1.0), n);
      const auto gn = Kernel::blockwise(operator_grid(transpose(from_matrix(net.P)), m));
      CHECK(op_norm_difference(g, gn) >= 0.3);
    }
  }

  TEST_CASE("refining the fluid grid barely moves a smooth solution") {
    FluidSpec s;
    s.G = sinusoidal(kDefaultResolution);
    s.mu = Profile(1.5);
    s.lambda = Profile(0.2);
    s.q0 = Profile::from_json(json{{"type", "linear"}, {"a", 0.1}, {"b", 0.8}});
    const TimeGrid g = TimeGrid::over(2.0, 0.02);
    const double a = norm_t1(fluid_limit(s, 64, g).Qbar);
    const double b = norm_t1(fluid_limit(s, 128, g).Qbar);
    CHECK(std::abs(a - b) <= 1e-3);
  }
}
