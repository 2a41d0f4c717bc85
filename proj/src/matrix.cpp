#include "fluidnet/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fluidnet/error.hpp"

namespace fluidnet {

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> values) : n_(n), a_(std::move(values)) {
  if (a_.size() != n * n) throw DomainError("SquareMatrix: expected " + std::to_string(n * n) + " values");
}

SquareMatrix SquareMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  SquareMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw DomainError("SquareMatrix: matrix is not square");
    std::copy(rows[i].begin(), rows[i].end(), m.a_.begin() + static_cast<std::ptrdiff_t>(i * m.n_));
  }
  return m;
}

SquareMatrix SquareMatrix::identity(std::size_t n) {
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::transposed() const {
  SquareMatrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double SquareMatrix::row_sum(std::size_t i) const {
  auto r = row(i);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

double SquareMatrix::max_row_sum() const {
  double best = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (double v : row(i)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

double SquareMatrix::max_column_sum() const {
  std::vector<double> col(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) col[j] += std::abs((*this)(i, j));
  return n_ == 0 ? 0.0 : *std::max_element(col.begin(), col.end());
}

double SquareMatrix::min_entry() const {
  return a_.empty() ? 0.0 : *std::min_element(a_.begin(), a_.end());
}

SquareMatrix multiply(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.size() != b.size()) throw GridMismatch("multiply: size mismatch");
  const std::size_t n = a.size();
  SquareMatrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

std::vector<double> multiply(const SquareMatrix& a, std::span<const double> x) {
  if (x.size() != a.size()) throw GridMismatch("multiply: vector length mismatch");
  std::vector<double> y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double s = 0.0;
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

PerronEstimate perron_root(const SquareMatrix& a, double tol, std::size_t max_iter) {
  const std::size_t n = a.size();
  PerronEstimate out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  if (a.min_entry() < 0.0) throw DomainError("perron_root: matrix has negative entries");

  // Nilpotency: for A >= 0, A^k 1 == 0 iff A^k == 0. Normalisation keeps the
  // zero pattern intact, so this is exact in floating point. The running log
  // of normalisers also gives a Gelfand estimate for the fallback path.
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  double log_growth = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    auto y = multiply(a, x);
    const double s = std::accumulate(y.begin(), y.end(), 0.0);
    if (s == 0.0) {
      out.iterations = k;
      out.converged = true;
      return out;
    }
    log_growth += std::log(s);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / s;
  }

  const double shift = a.max_row_sum();
  std::fill(x.begin(), x.end(), 1.0 / static_cast<double>(n));
  double previous = std::numeric_limits<double>::quiet_NaN();
  std::size_t gelfand_steps = n;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    auto y = multiply(a, x);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double sum_ax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_ax += y[i];
      const double ratio = y[i] / x[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      y[i] += shift * x[i];
    }
    // x is kept at unit l1 mass, so sum(Ax) is the Rayleigh-type estimate.
    const double estimate = sum_ax;
    const double total = std::accumulate(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / total;
    out.iterations = it;
    out.lower = lo;
    out.upper = hi;
    out.value = estimate;
    if (hi - lo <= tol * std::max(hi, std::numeric_limits<double>::min())) {
      out.value = 0.5 * (hi + lo);
      out.converged = true;
      return out;
    }
    if (std::isfinite(previous) && std::abs(estimate - previous) <= tol * std::abs(estimate)) {
      out.converged = true;
      return out;
    }
    previous = estimate;
  }

  // Gelfand fallback: continue the unshifted normalised iteration for max_iter steps.
  std::fill(x.begin(), x.end(), 1.0 / static_cast<double>(n));
  log_growth = 0.0;
  gelfand_steps = std::max<std::size_t>(max_iter, 1);
  for (std::size_t k = 0; k < gelfand_steps; ++k) {
    auto y = multiply(a, x);
    const double s = std::accumulate(y.begin(), y.end(), 0.0);
    if (s == 0.0) {
      out.value = 0.0;
      return out;
    }
    log_growth += std::log(s);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / s;
  }
  out.value = std::exp(log_growth / static_cast<double>(gelfand_steps));
  out.converged = false;
  return out;
}

}  // namespace fluidnet
