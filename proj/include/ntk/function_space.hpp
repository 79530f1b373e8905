#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ntk/limit_kernel.hpp"
#include "ntk/numerics.hpp"

namespace ntk {

/// Values f(x_i) of an R^{n_L}-valued function on the dataset, N x n_L.
class FunctionOnData {
 public:
  FunctionOnData() = default;
  explicit FunctionOnData(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  Eigen::Index points() const noexcept { return values_.rows(); }
  Eigen::Index outputs() const noexcept { return values_.cols(); }

  /// sqrt((1/N) sum_i |f(x_i)|^2).
  double norm() const;
  /// Flattened with index i * n_L + k.
  Vector flat() const;
  static FunctionOnData from_flat(const Vector& v, Eigen::Index outputs);

  friend FunctionOnData operator+(const FunctionOnData& a, const FunctionOnData& b);
  friend FunctionOnData operator-(const FunctionOnData& a, const FunctionOnData& b);
  friend FunctionOnData operator*(double s, const FunctionOnData& f);

 private:
  Matrix values_;
};

/// <f, g>_{p_in} = (1/N) sum_i f(x_i)^T g(x_i).
double inner(const FunctionOnData& f, const FunctionOnData& g);

/// Pi(f)_k(x_j) = (1/N) sum_i sum_k' K_kk'(x_i, x_j) f_k'(x_i).
class PiOperator {
 public:
  explicit PiOperator(KernelGram gram);

  const KernelGram& gram() const noexcept { return gram_; }
  Eigen::Index points() const noexcept { return gram_.points(); }
  Eigen::Index outputs() const noexcept { return gram_.n_out; }
  Eigen::Index dim() const noexcept { return points() * outputs(); }
  /// K / N on the flattened (i * n_L + k) coordinates.
  const SymMatrix& matrix() const noexcept { return scaled_; }

 private:
  KernelGram gram_;
  SymMatrix scaled_;
};

FunctionOnData pi_apply(const PiOperator& op, const FunctionOnData& f);

/// Eigenvalues below this fraction of the largest are the null space.
inline constexpr double kNullSpaceThreshold = 1e-12;

/// f_t = f* + exp(-t Pi)(f_0 - f*), by spectral decomposition. Modes in the
/// null space are left untouched.
std::vector<FunctionOnData> kernel_gd_exact(const PiOperator& op, const FunctionOnData& f0,
                                            const FunctionOnData& fstar, const std::vector<double>& times);

struct EulerOptions {
  double dt = 1e-3;
  long steps = 0;
  /// Store f every `keep_every` steps (0 keeps only the final state).
  long keep_every = 0;
};

struct EulerTrajectory {
  /// ||f_s - f*||_{p_in} for s = 0..steps.
  std::vector<double> residuals;
  std::vector<std::pair<long, FunctionOnData>> states;
  FunctionOnData final_state;
  /// dt * lambda_max; >= 2 means the explicit step is unstable.
  double stability_number = 0.0;
  std::optional<std::string> warning;
};

/// f <- f + dt Pi(f* - f). Throws IntegratorError after 10 consecutive
/// increases of the residual.
EulerTrajectory kernel_gd_euler(const PiOperator& op, const FunctionOnData& f0, const FunctionOnData& fstar,
                                const EulerOptions& options);

/// Kernel gradient descent carried to off-dataset queries:
/// f_t(x) = f_0(x) + (1/N) kappa(x)^T int_0^t (f* - f_s) ds, scalar-block
/// Grams only. kappa is M x N, f0_query M x n_L.
std::vector<Matrix> kernel_gd_exact_at(const PiOperator& op, const Matrix& kappa, const Matrix& f0_query,
                                       const FunctionOnData& f0, const FunctionOnData& fstar,
                                       const std::vector<double>& times);

struct KernelPcaResult {
  Vector eigenvalues;
  /// p_in-orthonormal; sign fixed so the largest-magnitude entry is positive.
  std::vector<FunctionOnData> components;
};

/// Non-centered kernel PCA: top `count` eigenpairs of Pi.
KernelPcaResult kernel_pca(const PiOperator& op, Eigen::Index count);

/// Dimension from which kernel_pca switches to power iteration.
inline constexpr Eigen::Index kPowerIterationThreshold = 1024;

struct Decomposition {
  FunctionOnData g;
  FunctionOnData h;
};

/// g = <f, c> / <c, c> c and h = f - g.
Decomposition decompose_along(const FunctionOnData& f_diff, const FunctionOnData& component);

struct RegressionOptions {
  /// Added to the Theta diagonal; defaults to 1e-10 trace / N.
  std::optional<double> jitter{};
  /// f_0 on the dataset when the initial function is not taken as mean zero.
  std::optional<Matrix> f0_on_data{};
};

struct RegressionPrediction {
  Matrix mean;     // M x n_L
  Vector variance; // M, shared by every output
};

/// t -> infinity limit of kernel gradient descent on a least-squares cost.
class RegressionLimit {
 public:
  /// Both Grams must be scalar blocks over the same N points.
  RegressionLimit(const KernelGram& theta, const KernelGram& sigma, const FunctionOnData& fstar,
                  RegressionOptions options = {});

  const Matrix& coefficients_star() const noexcept { return coef_star_; }
  const std::optional<Matrix>& coefficients_zero() const noexcept { return coef_zero_; }
  double jitter() const noexcept { return jitter_; }

  /// kappa_theta, kappa_sigma: M x N cross kernels; sigma_query_diag:
  /// Sigma(x, x) per query; f0_query: f_0 at the queries when f0_on_data was given.
  RegressionPrediction predict(const Matrix& kappa_theta, const Matrix& kappa_sigma,
                               const Vector& sigma_query_diag,
                               const std::optional<Matrix>& f0_query = std::nullopt) const;

  /// Cross kernels taken from the top level of `stack` on `measure`.
  RegressionPrediction predict(const KernelStack& stack, const EmpiricalMeasure& measure,
                               const Matrix& queries) const;

 private:
  Matrix sigma_data_;
  double jitter_ = 0.0;
  Cholesky chol_;
  Matrix coef_star_;
  std::optional<Matrix> coef_zero_;
};

RegressionLimit regression_limit(const KernelGram& theta, const KernelGram& sigma,
                                 const FunctionOnData& fstar, RegressionOptions options = {});

}  // namespace ntk
