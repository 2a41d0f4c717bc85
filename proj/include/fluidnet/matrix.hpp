#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fluidnet {

/// Dense row-major n x n matrix. Used for routing matrices and for the
/// cell-level representation of blockwise kernels.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {}
  SquareMatrix(std::size_t n, std::vector<double> values);
  /// Builds from nested rows; every row must have the same length as the outer vector.
  static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static SquareMatrix identity(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {a_.data() + i * n_, n_}; }
  std::span<const double> data() const noexcept { return a_; }

  SquareMatrix transposed() const;
  double row_sum(std::size_t i) const;
  double max_row_sum() const;
  double max_column_sum() const;
  double min_entry() const;

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

SquareMatrix multiply(const SquareMatrix& a, const SquareMatrix& b);
/// y = A x
std::vector<double> multiply(const SquareMatrix& a, std::span<const double> x);

/// Result of a Perron-root computation for a nonnegative matrix.
struct PerronEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Collatz-Wielandt bracket from the final iterate; lower <= rho <= upper.
  double lower = 0.0;
  double upper = 0.0;
};

/// Spectral radius of a nonnegative matrix by shifted power iteration.
///
/// Nilpotency is detected exactly first (A^k 1 == 0 for some k <= n). The
/// shifted iteration runs on A + sI with s the largest row sum, which removes
/// the periodic-oscillation failure mode of plain power iteration. When the
/// relative change never drops below `tol` within `max_iter` steps the value
/// falls back to the Gelfand estimate (sum of entries of A^n)^(1/n) and
/// `converged` is false.
PerronEstimate perron_root(const SquareMatrix& a, double tol = 1e-12, std::size_t max_iter = 20000);

}  // namespace fluidnet
