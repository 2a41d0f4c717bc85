#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fluidnet/error.hpp"
#include "fluidnet/measures.hpp"

using namespace fluidnet;

namespace {

AtomSet uniform(const TimeGrid& g, std::vector<std::vector<double>> atoms) {
  AtomSet a;
  a.grid = g;
  a.weights.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  a.atoms = std::move(atoms);
  return a;
}

std::vector<std::vector<double>> random_paths(std::mt19937_64& rng, std::size_t n, std::size_t len) {
  std::normal_distribution<double> step(0.0, 0.3);
  std::vector<std::vector<double>> out(n, std::vector<double>(len));
  for (auto& p : out) {
    double x = step(rng);
    for (double& v : p) v = (x += step(rng));
  }
  return out;
}

// Optimal assignment by enumerating permutations (n <= 7).
double assignment_oracle(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += sup_metric(a[i], b[perm[i]]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

// W1 on the line via the CDF formula, for constant paths.
double line_oracle(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
  std::vector<std::pair<double, double>> ev;
  for (auto [x, w] : a) ev.emplace_back(x, w);
  for (auto [x, w] : b) ev.emplace_back(x, -w);
  std::sort(ev.begin(), ev.end());
  double cdf = 0.0, total = 0.0;
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
    cdf += ev[k].second;
    total += std::abs(cdf) * (ev[k + 1].first - ev[k].first);
  }
  return total;
}

}  // namespace

TEST_SUITE("measures") {
  TEST_CASE("norm examples") {
    const TimeGrid g = TimeGrid::over(1.0, 0.1);
    CHECK(norm_t1(PathField(8, g)) == 0.0);
    CHECK(norm_t1(PathField::from_function(8, g, [](double, double t) { return t; })) == doctest::Approx(1.0));
    PathField half(8, g);
    for (std::size_t u = 0; u < 4; ++u)
      for (double& v : half.cell(u)) v = 2.0;
    CHECK(norm_t1(half) == doctest::Approx(1.0));
    CHECK(distance_t1(half, PathField(8, g)) == doctest::Approx(1.0));
  }

  TEST_CASE("sup metric examples") {
    const TimeGrid g = TimeGrid::over(1.0, 0.01);
    std::vector<double> p(g.points()), q(g.points());
    for (std::size_t j = 0; j < g.points(); ++j) {
      p[j] = g.time(j);
      q[j] = p[j] * p[j];
    }
    CHECK(sup_metric(p, p) == 0.0);
    auto r = p;
    for (double& v : r) v -= 0.3;
    CHECK(sup_metric(p, r) == doctest::Approx(0.3));
    CHECK(sup_metric(p, q) == doctest::Approx(0.25));
    CHECK_THROWS_AS(sup_metric(p, std::vector<double>(3)), GridMismatch);
  }

  TEST_CASE("W1 examples") {
    const TimeGrid g{4, 0.25};
    const std::vector<double> zero(5, 0.0), one(5, 1.0), half(5, 0.5);
    auto a = uniform(g, {zero, one});
    CHECK(wasserstein1(a, a).cost == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(wasserstein1(uniform(g, {zero}), uniform(g, {one})).cost == doctest::Approx(1.0));
    CHECK(wasserstein1(a, uniform(g, {half})).cost == doctest::Approx(0.5));
    AtomSet bad = a;
    bad.weights = {0.5, 0.6};
    CHECK_THROWS_AS(wasserstein1(bad, a), DomainError);
  }

  TEST_CASE("W1 matches exhaustive assignment") {
    std::mt19937_64 rng(11);
    const TimeGrid g{12, 0.1};
    for (std::size_t n = 1; n <= 7; ++n)
      for (int rep = 0; rep < 4; ++rep) {
        auto pa = random_paths(rng, n, g.points()), pb = random_paths(rng, n, g.points());
        CHECK(wasserstein1(uniform(g, pa), uniform(g, pb)).cost ==
              doctest::Approx(assignment_oracle(pa, pb)).epsilon(1e-12));
      }
  }

  TEST_CASE("W1 with unequal weights on constant paths matches the line formula") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(-2.0, 2.0), mass(0.1, 1.0);
    const TimeGrid g{3, 0.5};
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t n = 1 + rep % 6, m = 1 + (rep * 7) % 9;
      auto make = [&](std::size_t k) {
        std::vector<std::pair<double, double>> v(k);
        double s = 0.0;
        for (auto& [x, w] : v) {
          x = pos(rng);
          s += (w = mass(rng));
        }
        for (auto& pr : v) pr.second /= s;
        return v;
      };
      auto a = make(n), b = make(m);
      auto to_set = [&](const std::vector<std::pair<double, double>>& v) {
        AtomSet s;
        s.grid = g;
        for (auto [x, w] : v) {
          s.atoms.emplace_back(g.points(), x);
          s.weights.push_back(w);
        }
        // Renormalise against rounding.
        const double tot = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
        for (double& w : s.weights) w /= tot;
        return s;
      };
      auto sa = to_set(a), sb = to_set(b);
      auto r = wasserstein1(sa, sb);
      CHECK(r.cost == doctest::Approx(line_oracle(a, b)).epsilon(1e-9));
      // Plan marginals reproduce the weights.
      std::vector<double> ra(n, 0.0), rb(m, 0.0);
      for (auto e : r.plan) {
        CHECK(e.mass >= 0.0);
        ra[e.from] += e.mass;
        rb[e.to] += e.mass;
      }
      for (std::size_t i = 0; i < n; ++i) CHECK(ra[i] == doctest::Approx(sa.weights[i]).epsilon(1e-12));
      for (std::size_t j = 0; j < m; ++j) CHECK(rb[j] == doctest::Approx(sb.weights[j]).epsilon(1e-12));
    }
  }

  TEST_CASE("W1 is a metric on random triples and ignores atom order") {
    std::mt19937_64 rng(23);
    const TimeGrid g{20, 0.1};
    for (int rep = 0; rep < 25; ++rep) {
      auto a = uniform(g, random_paths(rng, 3 + rep % 5, g.points()));
      auto b = uniform(g, random_paths(rng, 2 + rep % 7, g.points()));
      auto c = uniform(g, random_paths(rng, 4 + rep % 3, g.points()));
      const double ab = wasserstein1(a, b).cost, ba = wasserstein1(b, a).cost;
      const double bc = wasserstein1(b, c).cost, ac = wasserstein1(a, c).cost;
      CHECK(std::abs(ab - ba) <= 1e-12);
      CHECK(ac <= ab + bc + 1e-9);
      auto shuffled = a;
      std::shuffle(shuffled.atoms.begin(), shuffled.atoms.end(), rng);
      CHECK(wasserstein1(shuffled, b).cost == doctest::Approx(ab).epsilon(1e-12));
    }
  }

  TEST_CASE("functional examples") {
    const TimeGrid g = TimeGrid::over(1.0, 0.01);
    std::vector<double> zero(g.points(), 0.0), one(g.points(), 1.0), ramp(g.points());
    for (std::size_t j = 0; j < g.points(); ++j) ramp[j] = g.time(j);
    for (const char* name : {"running_max", "path_integral", "projection"})
      CHECK(functional_average(uniform(g, {zero}), parse_functional(name, 0.0)).value == 0.0);
    CHECK(functional_average(uniform(g, {ramp}), parse_functional("path_integral")).value == doctest::Approx(0.5));
    CHECK(functional_average(uniform(g, {zero, one}), parse_functional("running_max", 0.0)).value == 0.5);
    CHECK(functional_average(uniform(g, {ramp}), parse_functional("running_max", 0.25)).value == doctest::Approx(0.75));
    auto proj = functional_average(uniform(g, {ramp, one}), parse_functional("projection", 0.3));
    CHECK(proj.value == doctest::Approx(0.65));
    CHECK_FALSE(proj.off_grid);
    auto off = functional_average(uniform(g, {ramp}), parse_functional("projection", 0.3049));
    CHECK(off.off_grid);
    CHECK(off.value == doctest::Approx(0.3));
    CHECK(functional_average(uniform(g, {ramp}), parse_functional("path_integral")).lipschitz == 1.0);
    CHECK_THROWS_AS(parse_functional("median"), DomainError);
  }

  TEST_CASE("Lipschitz functionals respect the dual bound") {
    std::mt19937_64 rng(31);
    const TimeGrid g = TimeGrid::over(2.0, 0.1);
    const FunctionalSpec specs[] = {parse_functional("running_max", 0.25), parse_functional("path_integral"),
                                    parse_functional("projection", 1.0)};
    for (int rep = 0; rep < 30; ++rep) {
      auto a = uniform(g, random_paths(rng, 2 + rep % 6, g.points()));
      auto b = uniform(g, random_paths(rng, 1 + rep % 9, g.points()));
      const double w = wasserstein1(a, b).cost;
      for (const auto& s : specs) {
        const auto fa = functional_average(a, s), fb = functional_average(b, s);
        CHECK(std::abs(fa.value - fb.value) <= fa.lipschitz * w + 1e-12);
      }
    }
  }
}
