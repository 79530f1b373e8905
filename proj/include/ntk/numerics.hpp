#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>

#include "ntk/errors.hpp"

namespace ntk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric matrix. The constructor symmetrizes its input as
/// (m + m^T) / 2, so entries (i, j) and (j, i) are bit-identical.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const noexcept { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }
  double trace() const { return m_.trace(); }

 private:
  Matrix m_;
};

/// Eigenpairs sorted by descending eigenvalue; eigenvectors are columns.
struct Spectrum {
  Vector values;
  Matrix vectors;
};

/// Full symmetric eigendecomposition, eigenvalues descending.
/// Throws NumericalError (naming the dimension) on non-convergence or
/// non-finite input.
Spectrum sym_eig(const SymMatrix& m);

/// Lower Cholesky factor of (m + jitter I). Fails with NotPositiveDefinite
/// carrying the offending pivot index instead of silently regularizing.
class Cholesky {
 public:
  explicit Cholesky(const SymMatrix& m, double jitter = 0.0);

  Matrix solve(const Matrix& rhs) const;
  const Matrix& lower() const noexcept { return l_; }
  Eigen::Index dim() const noexcept { return l_.rows(); }

 private:
  Matrix l_;
};

/// (m + jitter I)^{-1} rhs.
Matrix solve_spd(const SymMatrix& m, const Matrix& rhs, double jitter = 0.0);

/// 1e-10 * trace / dim: the opt-in guard used when modelling the
/// vanishing-ridge limit.
double ridge_jitter(const SymMatrix& m);

/// Top `count` eigenpairs of a PSD matrix by power iteration with
/// deflation against the already-converged vectors. Convergence is
/// declared when ||m v - lambda v|| <= tol * lambda_1.
Spectrum power_iteration(const SymMatrix& m, Eigen::Index count, double tol = 1e-10,
                         long max_iter = 100000);

/// Reproducible random stream. Identical (seed, stream id) pairs give
/// identical draws on every run; the engine is std::mt19937_64 seeded
/// through std::seed_seq, and normals come from the Marsaglia polar method
/// so the sequence does not depend on the standard library's distributions.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Independent child stream, derived deterministically from this
  /// stream's (seed, id) and `id`, unaffected by draws already taken.
  RngStream substream(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  void fill_normal(std::span<double> out);
  void fill_normal(std::span<float> out);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Vector standard_normal(RngStream& rng, Eigen::Index count);

/// Relative Frobenius distance ||a - b|| / ||b||.
double relative_frobenius(const Matrix& a, const Matrix& b);

}  // namespace ntk
