#include "fluidnet/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fluidnet/error.hpp"

namespace fluidnet {

using nlohmann::json;

std::size_t cell_index(double u, std::size_t cells) noexcept {
  if (!(u > 0.0)) return 0;
  const double c = std::ceil(u * static_cast<double>(cells));
  if (c <= 1.0) return 0;
  return std::min(cells - 1, static_cast<std::size_t>(c) - 1);
}

namespace {

double midpoint(std::size_t i, std::size_t cells) {
  return (static_cast<double>(i) + 0.5) / static_cast<double>(cells);
}

void require_finite(const SquareMatrix& g, const char* what) {
  for (double v : g.data())
    if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite kernel value");
}

SquareMatrix sample(const std::function<double(double, double)>& fn, std::size_t cells) {
  SquareMatrix g(cells);
  for (std::size_t i = 0; i < cells; ++i)
    for (std::size_t j = 0; j < cells; ++j) g(i, j) = fn(midpoint(i, cells), midpoint(j, cells));
  return g;
}

SquareMatrix refine_grid(const SquareMatrix& g, std::size_t cells) {
  const std::size_t r = cells / g.size();
  SquareMatrix out(cells);
  for (std::size_t i = 0; i < cells; ++i)
    for (std::size_t j = 0; j < cells; ++j) out(i, j) = g(i / r, j / r);
  return out;
}

SquareMatrix average_grid(const SquareMatrix& g, std::size_t cells) {
  const std::size_t r = g.size() / cells;
  SquareMatrix out(cells);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) out(i / r, j / r) += g(i, j);
  const double scale = 1.0 / static_cast<double>(r * r);
  for (std::size_t i = 0; i < cells; ++i)
    for (std::size_t j = 0; j < cells; ++j) out(i, j) *= scale;
  return out;
}

SquareMatrix scaled(SquareMatrix g, double s) {
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) g(i, j) *= s;
  return g;
}

SquareMatrix absolute(SquareMatrix g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) g(i, j) = std::abs(g(i, j));
  return g;
}

}  // namespace

Kernel Kernel::blockwise(SquareMatrix grid) {
  if (grid.size() == 0) throw DomainError("blockwise kernel: empty grid");
  require_finite(grid, "blockwise kernel");
  Kernel k;
  k.grid_ = std::make_shared<const SquareMatrix>(std::move(grid));
  return k;
}

Kernel Kernel::closed_form(std::string family, json params, std::function<double(double, double)> fn,
                           std::size_t resolution, bool exact) {
  if (resolution == 0) throw DomainError("closed-form kernel: resolution must be positive");
  Kernel k;
  k.family_ = std::move(family);
  k.params_ = std::move(params);
  k.fn_ = std::move(fn);
  k.exact_ = exact;
  auto g = sample(k.fn_, resolution);
  require_finite(g, k.family_.c_str());
  if (g.min_entry() < 0.0) throw DomainError(k.family_ + " kernel takes negative values");
  k.grid_ = std::make_shared<const SquareMatrix>(std::move(g));
  return k;
}

double Kernel::operator()(double u, double v) const {
  if (fn_) return transposed_ ? fn_(v, u) : fn_(u, v);
  const std::size_t m = grid_->size();
  return (*grid_)(cell_index(u, m), cell_index(v, m));
}

Kernel Kernel::discretized(std::size_t cells) const {
  if (cells == 0) throw DomainError("discretized: cells must be positive");
  const std::size_t g = resolution();
  if (is_blockwise() || exact_) {
    if (cells == g) return blockwise(*grid_);
    if (cells % g == 0) return blockwise(refine_grid(*grid_, cells));
    if (g % cells == 0) return blockwise(average_grid(*grid_, cells));
    if (is_blockwise())
      throw GridMismatch("kernel grid " + std::to_string(g) + " and " + std::to_string(cells) +
                         " cells are not nested");
  }
  if (cells == g) return blockwise(*grid_);
  return blockwise(sample([this](double u, double v) { return (*this)(u, v); }, cells));
}

json Kernel::to_json() const {
  if (is_blockwise()) {
    json rows = json::array();
    for (std::size_t i = 0; i < grid_->size(); ++i) {
      auto r = grid_->row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return json{{"family", "blockwise"}, {"grid", rows}};
  }
  json out{{"family", family_}, {"params", params_}, {"resolution", resolution()}};
  if (transposed_) out["transposed"] = true;
  return out;
}

bool operator==(const Kernel& a, const Kernel& b) {
  if (a.is_blockwise() != b.is_blockwise()) return false;
  if (!a.is_blockwise() &&
      (a.family_ != b.family_ || a.params_ != b.params_ || a.transposed_ != b.transposed_))
    return false;
  return a.grid() == b.grid();
}

Kernel transpose(const Kernel& f) {
  Kernel t = f;
  if (!f.is_blockwise()) t.transposed_ = !f.transposed_;
  t.grid_ = std::make_shared<const SquareMatrix>(f.grid().transposed());
  return t;
}

// ---------------------------------------------------------------------------
// Families

namespace {

double num(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_number())
    throw DomainError(std::string("kernel parameter '") + key + "' missing or not a number");
  const double v = p[key].get<double>();
  if (!std::isfinite(v)) throw DomainError(std::string("kernel parameter '") + key + "' is not finite");
  return v;
}

double num_or(const json& p, const char* key, double fallback) {
  return p.contains(key) ? num(p, key) : fallback;
}

std::vector<double> breaks_of(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_array()) throw DomainError(std::string("kernel parameter '") + key + "' must be an array");
  auto b = p[key].get<std::vector<double>>();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!(b[i] > 0.0 && b[i] < 1.0)) throw DomainError("partition breaks must lie in (0,1)");
    if (i > 0 && !(b[i] > b[i - 1])) throw DomainError("partition breaks must be strictly increasing");
  }
  return b;
}

// Interval index of u in the partition [0,b_0], (b_0,b_1], ..., (b_last,1].
std::size_t interval_of(double u, const std::vector<double>& breaks) {
  return static_cast<std::size_t>(std::lower_bound(breaks.begin(), breaks.end(), u) - breaks.begin());
}

void require(bool ok, const std::string& message) {
  if (!ok) throw DomainError(message);
}

Kernel family_kernel(const std::string& family, const json& p, std::size_t res) {
  if (family == "constant") {
    const double c = num(p, "c");
    require(c >= 0.0, "constant kernel: c must be nonnegative");
    return Kernel::closed_form(family, p, [c](double, double) { return c; }, 1, true);
  }
  if (family == "symmetric") {
    const double a = num(p, "a"), b = num(p, "b");
    require(a >= std::abs(b), "symmetric kernel: need a >= |b|");
    return Kernel::closed_form(family, p, [a, b](double u, double v) {
      return a + b * std::cos(2.0 * std::numbers::pi * (u - v));
    }, res);
  }
  if (family == "bipartite") {
    const double k = num(p, "k");
    const double upper = num_or(p, "upper", 0.0), lower = num_or(p, "lower", 0.0);
    require(k > 0.0 && k < 1.0, "bipartite kernel: split k must lie in (0,1)");
    require(upper >= 0.0 && lower >= 0.0, "bipartite kernel: block values must be nonnegative");
    // upper: u in [0,k], v in (k,1]; lower: u in (k,1], v in [0,k].
    return Kernel::closed_form(family, p, [k, upper, lower](double u, double v) {
      const bool a = u <= k, b = v <= k;
      if (a == b) return 0.0;
      return a ? upper : lower;
    }, res);
  }
  if (family == "block") {
    const auto rows = breaks_of(p, p.contains("row_breaks") ? "row_breaks" : "breaks");
    const auto cols = breaks_of(p, p.contains("col_breaks") ? "col_breaks" : "breaks");
    require(p.contains("values") && p["values"].is_array(), "block kernel: 'values' must be a matrix");
    const auto values = p["values"].get<std::vector<std::vector<double>>>();
    require(values.size() == rows.size() + 1, "block kernel: values must have one row per row interval");
    for (const auto& r : values) {
      require(r.size() == cols.size() + 1, "block kernel: values must have one column per column interval");
      for (double v : r) require(std::isfinite(v) && v >= 0.0, "block kernel: values must be finite and nonnegative");
    }
    return Kernel::closed_form(family, p, [rows, cols, values](double u, double v) {
      return values[interval_of(u, rows)][interval_of(v, cols)];
    }, res);
  }
  if (family == "clustered") {
    const auto breaks = breaks_of(p, "breaks");
    std::vector<double> within;
    if (p.contains("within") && p["within"].is_array()) within = p["within"].get<std::vector<double>>();
    else within.assign(breaks.size() + 1, num(p, "within"));
    const double across = num_or(p, "across", 0.0);
    require(within.size() == breaks.size() + 1, "clustered kernel: one 'within' value per cluster");
    require(across >= 0.0 && std::ranges::all_of(within, [](double w) { return w >= 0.0; }),
            "clustered kernel: values must be nonnegative");
    return Kernel::closed_form(family, p, [breaks, within, across](double u, double v) {
      const auto a = interval_of(u, breaks);
      return a == interval_of(v, breaks) ? within[a] : across;
    }, res);
  }
  if (family == "ring") {
    const double eps = num(p, "eps"), alpha = num(p, "alpha");
    require(eps > 0.0 && eps < 1.0, "ring kernel: eps must lie in (0,1)");
    require(alpha > 0.0 && alpha < 1.0, "ring kernel: alpha must lie in (0,1)");
    // Radius alpha/2 (not alpha) so that the row mass is 1 - eps.
    const double value = (1.0 - eps) / alpha, radius = alpha / 2.0;
    return Kernel::closed_form(family, p, [value, radius](double u, double v) {
      const double d = std::abs(u - v);
      const double circ = std::min(d, 1.0 - d);
      return (circ > 0.0 && circ <= radius + 1e-12) ? value : 0.0;
    }, res);
  }
  if (family == "power") {
    const double a = num(p, "a"), x = num(p, "p"), y = num(p, "q");
    require(a > 0.0 && x > 0.0 && y > 0.0, "power kernel: a, p, q must be positive");
    return Kernel::closed_form(family, p, [a, x, y](double u, double v) {
      return a * std::pow(u, x) * std::pow(v, y);
    }, res);
  }
  if (family == "sinusoidal") {
    const double a = num(p, "a"), b = num(p, "b"), c = num(p, "c");
    require(a <= 1.0 && a > std::abs(b) + std::abs(c), "sinusoidal kernel: need 1 >= a > |b| + |c|");
    return Kernel::closed_form(family, p, [a, b, c](double u, double v) {
      return a + b * std::sin(2.0 * std::numbers::pi * u) + c * std::sin(2.0 * std::numbers::pi * v);
    }, res);
  }
  throw DomainError("unknown kernel family '" + family + "'");
}

}  // namespace

Kernel make_kernel(const json& spec, bool require_reflection_class) {
  if (!spec.is_object() || !spec.contains("family")) throw DomainError("kernel spec needs a 'family'");
  const auto family = spec["family"].get<std::string>();
  Kernel k;
  if (family == "blockwise") {
    const json& g = spec.contains("grid") ? spec["grid"] : spec.value("params", json::object()).value("grid", json());
    if (!g.is_array()) throw DomainError("blockwise kernel needs a 'grid' matrix");
    k = Kernel::blockwise(SquareMatrix::from_rows(g.get<std::vector<std::vector<double>>>()));
  } else {
    const std::size_t res = spec.value("resolution", kDefaultResolution);
    k = family_kernel(family, spec.value("params", json::object()), res);
    if (spec.value("transposed", false)) k = transpose(k);
  }
  if (require_reflection_class && op_norm(k) > 1.0 + 1e-9)
    throw DomainError(family + " kernel has operator norm " + std::to_string(op_norm(k)) + " > 1");
  return k;
}

Kernel from_matrix(const SquareMatrix& p) {
  const std::size_t n = p.size();
  if (n == 0) throw DomainError("from_matrix: empty matrix");
  if (p.min_entry() < 0.0) throw DomainError("from_matrix: negative routing probability");
  for (std::size_t i = 0; i < n; ++i)
    if (p.row_sum(i) > 1.0 + 1e-12) throw DomainError("from_matrix: row " + std::to_string(i) + " sums above 1");
  return Kernel::blockwise(scaled(p, static_cast<double>(n)));
}

Kernel constant_kernel(double c) { return make_kernel(json{{"family", "constant"}, {"params", {{"c", c}}}}); }

// ---------------------------------------------------------------------------
// Action

SquareMatrix operator_grid(const Kernel& f, std::size_t cells) {
  if (cells == 0) throw DomainError("operator_grid: no cells");
  if (f.exact_grid() ? cells % f.resolution() == 0 : cells == f.resolution()) return f.grid();
  return f.discretized(cells).grid();
}

std::vector<double> apply_grid(const SquareMatrix& g, std::span<const double> values) {
  const std::size_t m = values.size(), n = g.size();
  if (n == 0 || m % n != 0) throw GridMismatch("apply: kernel grid does not divide the sample grid");
  const std::size_t r = m / n;
  std::vector<double> avg(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) avg[i / r] += values[i];
  for (double& a : avg) a /= static_cast<double>(r);
  std::vector<double> coarse(n, 0.0);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = g.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * avg[j];
    coarse[i] = s * w;
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = coarse[i / r];
  return out;
}

PathField apply_grid_field(const SquareMatrix& g, const PathField& x) {
  const std::size_t m = x.cells(), n = g.size();
  if (n == 0 || m % n != 0) throw GridMismatch("apply_field: kernel grid does not divide the sample grid");
  const PathField src = (n == m) ? x : coarsen(x, n);
  PathField coarse(n, x.grid());
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = coarse.cell(i);
    auto row = g.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = row[j] * w;
      if (a == 0.0) continue;
      auto s = src.cell(j);
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += a * s[t];
    }
  }
  return n == m ? coarse : refine(coarse, m);
}

std::vector<double> apply_kernel(const Kernel& f, std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("apply: non-finite input");
  return apply_grid(operator_grid(f, values.size()), values);
}

PathField apply_field(const Kernel& f, const PathField& x) {
  return apply_grid_field(operator_grid(f, x.cells()), x);
}

// ---------------------------------------------------------------------------
// Algebra and norms

std::size_t common_resolution(const Kernel& f1, const Kernel& f2) {
  const std::size_t a = f1.resolution(), b = f2.resolution();
  const std::size_t m = std::max(a, b);
  // Closed forms can be re-sampled anywhere; blockwise grids must nest.
  auto fits = [m](const Kernel& k) { return !k.exact_grid() || m % k.resolution() == 0; };
  if (!fits(f1) || !fits(f2))
    throw GridMismatch("kernel grids " + std::to_string(a) + " and " + std::to_string(b) + " are not nested");
  return m;
}

Kernel compose(const Kernel& f1, const Kernel& f2) {
  const std::size_t m = common_resolution(f1, f2);
  const auto a = f1.discretized(m).grid();
  const auto b = f2.discretized(m).grid();
  return Kernel::blockwise(scaled(multiply(a, b), 1.0 / static_cast<double>(m)));
}

double op_norm(const Kernel& f) {
  return f.grid().max_column_sum() / static_cast<double>(f.resolution());
}

double op_norm_difference(const Kernel& f1, const Kernel& f2) {
  const std::size_t m = common_resolution(f1, f2);
  const auto a = f1.discretized(m).grid();
  const auto b = f2.discretized(m).grid();
  SquareMatrix d(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) d(i, j) = a(i, j) - b(i, j);
  return d.max_column_sum() / static_cast<double>(m);
}

SpectralEstimate spectral_radius(const Kernel& f, double tol, std::size_t max_iter) {
  const std::size_t m = f.resolution();
  if (f.grid().min_entry() < 0.0) throw DomainError("spectral_radius: kernel has negative values");
  const auto p = perron_root(scaled(f.grid(), 1.0 / static_cast<double>(m)), tol, max_iter);
  return SpectralEstimate{p.value, m, p.iterations, p.converged, p.lower, p.upper};
}

ReflectionVerdict reflection_class_check(const Kernel& f, const ReflectionTolerances& tol) {
  ReflectionVerdict v;
  v.nonnegative = f.grid().min_entry() >= -tol.nonnegativity;
  v.op_norm = op_norm(f);
  // On |G| when signs are off: still a bound on the spectral radius of G.
  v.spectral_radius = spectral_radius(v.nonnegative && f.grid().min_entry() >= 0.0
                                          ? f
                                          : Kernel::blockwise(absolute(f.grid())));
  v.in_class_R = v.nonnegative && v.op_norm <= 1.0 + tol.norm &&
                 v.spectral_radius.value < 1.0 - tol.spectral_margin;
  return v;
}

std::vector<double> power_norms(const Kernel& f, std::size_t count) {
  const auto& g = f.grid();
  const std::size_t m = g.size();
  if (g.min_entry() < 0.0) throw DomainError("power_norms: kernel has negative values");
  // For G >= 0 the column integrals of F^(n) obey s_{n+1} = s_n G / M, so the
  // norms of all powers follow from vector-matrix products.
  const double w = 1.0 / static_cast<double>(m);
  std::vector<double> s(m, 0.0), next(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) s[j] += g(i, j) * w;
  std::vector<double> norms;
  norms.reserve(count);
  for (std::size_t n = 1; n <= count; ++n) {
    norms.push_back(*std::max_element(s.begin(), s.end()));
    if (n == count) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double si = s[i] * w;
      if (si == 0.0) continue;
      auto row = g.row(i);
      for (std::size_t j = 0; j < m; ++j) next[j] += si * row[j];
    }
    s.swap(next);
  }
  return norms;
}

ContractionCertificate make_certificate(double gamma, std::size_t k, double power_norm) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("certificate: gamma must lie in (0,1)");
  if (k == 0) throw DomainError("certificate: k must be positive");
  ContractionCertificate c;
  c.gamma = gamma;
  c.k = k;
  c.power_norm = power_norm;
  c.psi_lipschitz = static_cast<double>(k) / (1.0 - gamma);
  c.phi_lipschitz = 1.0 + 2.0 * static_cast<double>(k) / (1.0 - gamma);
  c.inverse_norm_bound = c.psi_lipschitz;
  return c;
}

ContractionCertificate bounded_parameters(const Kernel& f, double gamma, std::size_t cap) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("bounded_parameters: gamma must lie in (0,1)");
  const auto norms = power_norms(f, cap);
  for (std::size_t k = 1; k <= norms.size(); ++k)
    if (norms[k - 1] <= gamma) return make_certificate(gamma, k, norms[k - 1]);
  throw SolverError("bounded_parameters: no k <= " + std::to_string(cap) + " with ||F^(k)|| <= " +
                    std::to_string(gamma) + " (spectral radius too close to 1)");
}

double l1_norm(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += std::abs(v);
  return s / static_cast<double>(values.size());
}

NeumannResult neumann_apply(const Kernel& f, std::span<const double> values, double tol) {
  const auto cert = bounded_parameters(f);
  const auto g = operator_grid(f, values.size());
  const double stop = tol * std::min(1.0, 1.0 / cert.inverse_norm_bound);
  NeumannResult out;
  out.values.assign(values.begin(), values.end());
  std::vector<double> term(values.begin(), values.end());
  const std::size_t max_terms = 1000000;
  for (out.terms = 1; out.terms < max_terms; ++out.terms) {
    term = apply_grid(g, term);
    if (l1_norm(term) <= stop) break;
    for (std::size_t i = 0; i < term.size(); ++i) out.values[i] += term[i];
  }
  if (out.terms == max_terms) throw SolverError("neumann_apply: series did not reach tolerance");
  // Remaining tail is (1 - F)^{-1} applied to the first omitted term.
  out.error_bound = cert.inverse_norm_bound * l1_norm(term);
  auto image = apply_grid(g, out.values);
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = out.values[i] - image[i] - values[i];
  out.residual = l1_norm(image);
  return out;
}

}  // namespace fluidnet
