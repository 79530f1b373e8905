#pragma once

#include <vector>

#include "ntk/nonlinearity.hpp"
#include "ntk/numerics.hpp"

namespace ntk {

/// Finite dataset x_1..x_N (rows) carrying the uniform empirical measure.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(Matrix points);

  const Matrix& points() const noexcept { return points_; }
  Eigen::Index size() const noexcept { return points_.rows(); }
  Eigen::Index input_dim() const noexcept { return points_.cols(); }

 private:
  Matrix points_;
};

enum class GramKind { sigma, theta_limit, theta_empirical };

std::string to_string(GramKind kind);

/// Kernel Gram matrix over a dataset.
///
/// Limiting kernels are stored as the scalar N x N block; the Kronecker
/// factor Id_{n_out} is implicit (scalar_block == true). Empirical NTKs of
/// multi-output networks carry the full (N n_out)^2 matrix, indexed
/// i * n_out + k.
struct KernelGram {
  SymMatrix entries;
  Eigen::Index n_out = 1;
  bool scalar_block = true;
  GramKind kind = GramKind::sigma;
  /// Level l of Sigma^(l), or the depth L of an NTK.
  int level = 1;
  /// Empirical only: widths n_0..n_L and training time.
  std::vector<Eigen::Index> widths{};
  double time = 0.0;

  Eigen::Index points() const { return scalar_block ? entries.dim() : entries.dim() / n_out; }
  /// The (N n_out) x (N n_out) matrix, materializing the Kronecker factor.
  Matrix full() const;
};

/// Per-level Grams of the limiting kernels on one dataset.
/// sigma[l - 1] = Sigma^(l), theta[l - 1] = Theta^(l)_inf for l = 1..L, and
/// sigma_dot[l - 1] = Sigma_dot^(l) for l = 2..L (sigma_dot[0] is empty).
struct KernelStack {
  int depth = 1;
  double beta = 0.0;
  Nonlinearity nl = Nonlinearity::relu();
  std::vector<Matrix> sigma;
  std::vector<Matrix> sigma_dot;
  std::vector<Matrix> theta;

  bool has_theta() const noexcept { return !theta.empty(); }
  KernelGram sigma_gram(int level, Eigen::Index n_out = 1) const;
  KernelGram theta_gram(Eigen::Index n_out = 1) const;
  KernelGram theta_gram_at(int level, Eigen::Index n_out = 1) const;
};

/// Activation kernels Sigma^(1..L) only.
KernelStack sigma_stack(const EmpiricalMeasure& measure, int depth, double beta,
                        const Nonlinearity& nl, std::optional<DualMethod> method = std::nullopt);

/// Sigma^(1..L), Sigma_dot^(2..L) and Theta^(1..L)_inf.
KernelStack ntk_stack(const EmpiricalMeasure& measure, int depth, double beta,
                      const Nonlinearity& nl, std::optional<DualMethod> method = std::nullopt);

/// Kernel values between M off-dataset queries and the N dataset points,
/// one M x N matrix per level, plus the queries' own diagonal values.
struct CrossKernel {
  std::vector<Matrix> sigma;
  std::vector<Matrix> theta;
  std::vector<Vector> query_sigma_diag;
  std::vector<Vector> query_theta_diag;
};

/// Runs the pairwise recursion on (query, x_i) pairs, reusing the dataset
/// diagonal already stored in `stack`.
CrossKernel cross_kernel(const KernelStack& stack, const EmpiricalMeasure& measure,
                         const Matrix& queries, std::optional<DualMethod> method = std::nullopt);

/// Smallest eigenvalue of the (materialized) Gram.
double min_eigenvalue(const KernelGram& g);

}  // namespace ntk
