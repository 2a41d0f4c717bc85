#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fluidnet {

/// Uniform time grid t_j = j * dt, j = 0..steps.
struct TimeGrid {
  std::size_t steps = 0;
  double dt = 1.0;

  static TimeGrid over(double horizon, double dt);

  std::size_t points() const noexcept { return steps + 1; }
  double time(std::size_t j) const noexcept { return static_cast<double>(j) * dt; }
  double horizon() const noexcept { return time(steps); }
  /// Index of the grid point nearest to t (clamped to the grid).
  std::size_t nearest(double t) const noexcept;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// A discretised element of D_T(L1): `cells` uniform space cells on [0,1]
/// times the points of a TimeGrid. Cell i covers [0,1/M] for i = 0 and
/// (i/M, (i+1)/M] otherwise; storage is cell-major.
///
/// A PathField with N cells is also how N finite-dimensional paths are
/// carried around (station i <-> cell i), which makes the blockwise lift of
/// a finite system the identity on storage.
class PathField {
 public:
  PathField() = default;
  PathField(std::size_t cells, TimeGrid grid, double fill = 0.0);

  /// Samples fn(u, t) at cell midpoints u = (i + 1/2)/M and grid times.
  static PathField from_function(std::size_t cells, TimeGrid grid,
                                 const std::function<double(double, double)>& fn);

  std::size_t cells() const noexcept { return cells_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t points() const noexcept { return grid_.points(); }

  double operator()(std::size_t cell, std::size_t j) const { return v_[cell * grid_.points() + j]; }
  double& operator()(std::size_t cell, std::size_t j) { return v_[cell * grid_.points() + j]; }

  std::span<double> cell(std::size_t i) { return {v_.data() + i * grid_.points(), grid_.points()}; }
  std::span<const double> cell(std::size_t i) const { return {v_.data() + i * grid_.points(), grid_.points()}; }
  std::vector<double> slice(std::size_t j) const;

  std::span<const double> data() const noexcept { return v_; }
  std::span<double> data() noexcept { return v_; }

  PathField& operator+=(const PathField& other);
  PathField& operator-=(const PathField& other);
  PathField& operator*=(double s);
  friend PathField operator+(PathField a, const PathField& b) { return a += b; }
  friend PathField operator-(PathField a, const PathField& b) { return a -= b; }
  friend PathField operator*(PathField a, double s) { return a *= s; }

  /// Value-wise minimum over the whole field.
  double min_value() const;
  /// True when every cell path starts at >= -tol and never decreases by more than tol.
  bool is_increasing(double tol = 0.0) const;

  friend bool operator==(const PathField&, const PathField&) = default;

 private:
  std::size_t cells_ = 0;
  TimeGrid grid_{};
  std::vector<double> v_;
};

/// Throws GridMismatch unless both fields share cell count and time grid.
void require_same_shape(const PathField& a, const PathField& b, const char* what);

/// Blockwise expansion to `cells` (must be a multiple of a.cells()).
PathField refine(const PathField& a, std::size_t cells);
/// Cell averages over `cells` equal blocks (a.cells() must be a multiple of `cells`).
PathField coarsen(const PathField& a, std::size_t cells);

// Serialisation.
//
// CSV (version 1):
//   # fluidnet-pathfield v1 cells=<M> steps=<K> dt=<dt>
//   cell_index,t,value
//   0,0,<value>
//   ...
// Rows are cell-major. The comment line is optional on input; without it the
// shape is recovered from the rows (dt from the second time point).
//
// Binary (version 1), little-endian:
//   char[4] "FNPF" | uint32 version = 1 | uint64 M | uint64 K | float64 dt |
//   float64 values[M * (K + 1)] (cell-major)
void write_csv(std::ostream& os, const PathField& f);
PathField read_csv(std::istream& is);
void write_binary(std::ostream& os, const PathField& f);
PathField read_binary(std::istream& is);

void save(const std::string& path, const PathField& f);  // by extension: .bin or .csv
PathField load(const std::string& path);

}  // namespace fluidnet
