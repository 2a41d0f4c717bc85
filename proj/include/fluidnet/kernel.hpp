#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluidnet/matrix.hpp"
#include "fluidnet/path_field.hpp"

namespace fluidnet {

/// Default discretisation resolution for closed-form kernels.
inline constexpr std::size_t kDefaultResolution = 512;

/// A function G on [0,1]^2 viewed as the integral operator
/// (Gf)(u) = \int_0^1 G(u,v) f(v) dv.
///
/// Every kernel carries a blockwise-constant grid: for blockwise kernels it
/// *is* the kernel, for closed forms it is the midpoint discretisation at
/// `resolution()` cells per axis. Row index = u cell, column index = v cell.
/// Kernels are immutable.
class Kernel {
 public:
  Kernel() = default;

  /// Blockwise kernel with value grid(i,j) on K_i x K_j.
  static Kernel blockwise(SquareMatrix grid);
  /// Closed form. `exact` marks functions that are themselves constant on the
  /// cells of a grid of size `resolution` (then refinement is exact).
  static Kernel closed_form(std::string family, nlohmann::json params,
                            std::function<double(double, double)> fn, std::size_t resolution,
                            bool exact = false);

  bool is_blockwise() const noexcept { return !fn_; }
  /// True when grid() represents the kernel exactly (blockwise, or a closed
  /// form that is constant on the grid cells).
  bool exact_grid() const noexcept { return !fn_ || exact_; }
  const std::string& family() const noexcept { return family_; }
  const nlohmann::json& params() const noexcept { return params_; }
  bool transposed() const noexcept { return transposed_; }
  std::size_t resolution() const noexcept { return grid_->size(); }
  const SquareMatrix& grid() const noexcept { return *grid_; }

  /// Point evaluation G(u,v). Blockwise kernels use the cell containing the point.
  double operator()(double u, double v) const;

  /// Blockwise version of this kernel on `cells` cells per axis. Blockwise
  /// grids are refined or block-averaged (exact, needs divisibility); closed
  /// forms are re-sampled at the new midpoints.
  Kernel discretized(std::size_t cells) const;

  nlohmann::json to_json() const;

  /// Grid equality plus identical closed-form description.
  friend bool operator==(const Kernel& a, const Kernel& b);

 private:
  friend Kernel transpose(const Kernel& f);

  std::string family_ = "blockwise";
  nlohmann::json params_ = nlohmann::json::object();
  std::function<double(double, double)> fn_;
  bool transposed_ = false;
  bool exact_ = false;
  std::shared_ptr<const SquareMatrix> grid_ = std::make_shared<const SquareMatrix>(1);
};

/// Index of the cell containing u: K_0 = [0,1/M], K_i = (i/M, (i+1)/M].
std::size_t cell_index(double u, std::size_t cells) noexcept;

/// Builds a kernel from {"family": ..., "params": {...}, "resolution"?: M,
/// "grid"?: [[...]], "transposed"?: bool}. Families: constant, symmetric,
/// bipartite, block, clustered, ring, power, sinusoidal, blockwise.
/// With `require_reflection_class` the kernel must have op norm <= 1.
Kernel make_kernel(const nlohmann::json& spec, bool require_reflection_class = false);

/// Blockwise kernel G^N with value N * P(i,j) on K_i x K_j.
Kernel from_matrix(const SquareMatrix& p);

/// Blockwise G ≡ c on a 1x1 grid.
Kernel constant_kernel(double c);

/// (Ff)(u) on the cells of f. A blockwise kernel with grid g needs g | M or
/// M | g; closed forms are re-discretised at M.
std::vector<double> apply_kernel(const Kernel& f, std::span<const double> values);
PathField apply_field(const Kernel& f, const PathField& x);

/// The grid used to act on functions with `cells` cells: the kernel's own
/// grid when it divides `cells`, otherwise discretized(cells).grid().
/// Hoist this out of loops that apply the same kernel repeatedly.
SquareMatrix operator_grid(const Kernel& f, std::size_t cells);
/// Action of a blockwise grid g (g.size() must divide values.size()).
std::vector<double> apply_grid(const SquareMatrix& g, std::span<const double> values);
PathField apply_grid_field(const SquareMatrix& g, const PathField& x);

Kernel transpose(const Kernel& f);
/// Kernel of F1 F2, i.e. \int F1(u,w) F2(w,v) dw, on the common grid.
Kernel compose(const Kernel& f1, const Kernel& f2);
/// Common cell count for binary operations; throws GridMismatch.
std::size_t common_resolution(const Kernel& f1, const Kernel& f2);

/// sup_v \int |G(u,v)| du, exact on the grid.
double op_norm(const Kernel& f);
double op_norm_difference(const Kernel& f1, const Kernel& f2);

struct SpectralEstimate {
  double value = 0.0;
  std::size_t resolution = 0;
  std::size_t iterations = 0;
  bool converged = false;
  double lower = 0.0;
  double upper = 0.0;
};
SpectralEstimate spectral_radius(const Kernel& f, double tol = 1e-12, std::size_t max_iter = 20000);

struct ReflectionTolerances {
  double nonnegativity = 1e-9;
  double norm = 1e-9;
  double spectral_margin = 1e-6;
};

struct ReflectionVerdict {
  bool nonnegative = false;
  double op_norm = 0.0;
  SpectralEstimate spectral_radius;
  bool in_class_R = false;
};
ReflectionVerdict reflection_class_check(const Kernel& f, const ReflectionTolerances& tol = {});

struct ContractionCertificate {
  double gamma = 0.5;
  std::size_t k = 1;
  double psi_lipschitz = 0.0;
  double phi_lipschitz = 0.0;
  double inverse_norm_bound = 0.0;
  /// ||F^(k)||_op as measured.
  double power_norm = 0.0;
};
inline constexpr std::size_t kMaxCertificatePower = 64;

/// Smallest k <= cap with ||F^(k)||_op <= gamma.
ContractionCertificate bounded_parameters(const Kernel& f, double gamma = 0.5,
                                          std::size_t cap = kMaxCertificatePower);
/// Certificate built from explicit (gamma, k).
ContractionCertificate make_certificate(double gamma, std::size_t k, double power_norm);
/// ||F^(n)||_op for n = 1..count of a nonnegative kernel.
std::vector<double> power_norms(const Kernel& f, std::size_t count);

struct NeumannResult {
  std::vector<double> values;
  std::size_t terms = 0;
  /// ||(1 - F) values - f||_1
  double residual = 0.0;
  /// Bound on the distance to (1 - F)^{-1} f.
  double error_bound = 0.0;
};
NeumannResult neumann_apply(const Kernel& f, std::span<const double> values, double tol = 1e-12);

/// Mean absolute value over cells (the L1 norm of a cell function).
double l1_norm(std::span<const double> values);

}  // namespace fluidnet
