#include "ntk/numerics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ntk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  return std::seed_seq{lo(seed), hi(seed), lo(stream), hi(stream)};
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw ArgumentError("SymMatrix needs a square matrix, got " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()));
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

Spectrum sym_eig(const SymMatrix& m) {
  if (!m.matrix().allFinite()) {
    throw NumericalError("sym_eig: non-finite entries in matrix of dimension " +
                         std::to_string(m.dim()));
  }
  // Householder tridiagonalization + implicit symmetric QR, capped at 30*dim sweeps.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("sym_eig: eigensolver did not converge for matrix of dimension " +
                         std::to_string(m.dim()));
  }
  const auto n = m.dim();
  Spectrum s{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    s.values(k) = solver.eigenvalues()(n - 1 - k);
    s.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return s;
}

Cholesky::Cholesky(const SymMatrix& m, double jitter) {
  if (jitter < 0.0) throw ArgumentError("Cholesky: jitter must be non-negative");
  const auto n = m.dim();
  l_ = Matrix::Zero(n, n);
  const Matrix& a = m.matrix();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pivot = a(j, j) + jitter - l_.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0)) throw NotPositiveDefinite(static_cast<std::size_t>(j), pivot);
    const double ljj = std::sqrt(pivot);
    l_(j, j) = ljj;
    const auto rest = n - j - 1;
    if (rest > 0) {
      l_.col(j).tail(rest) =
          (a.col(j).tail(rest) - l_.block(j + 1, 0, rest, j) * l_.row(j).head(j).transpose()) /
          ljj;
    }
  }
}

Matrix Cholesky::solve(const Matrix& rhs) const {
  if (rhs.rows() != l_.rows()) {
    throw ArgumentError("Cholesky::solve: rhs has " + std::to_string(rhs.rows()) +
                        " rows, expected " + std::to_string(l_.rows()));
  }
  const auto lower = l_.triangularView<Eigen::Lower>();
  Matrix y = lower.solve(rhs);
  return lower.transpose().solve(y);
}

Matrix solve_spd(const SymMatrix& m, const Matrix& rhs, double jitter) {
  return Cholesky(m, jitter).solve(rhs);
}

double ridge_jitter(const SymMatrix& m) {
  return m.dim() == 0 ? 0.0 : 1e-10 * m.trace() / static_cast<double>(m.dim());
}

Spectrum power_iteration(const SymMatrix& m, Eigen::Index count, double tol, long max_iter) {
  const auto n = m.dim();
  if (count < 1 || count > n) {
    throw ArgumentError("power_iteration: count " + std::to_string(count) +
                        " outside [1, " + std::to_string(n) + "]");
  }
  const Matrix& a = m.matrix();
  Spectrum out{Vector::Zero(count), Matrix::Zero(n, count)};
  RngStream start_rng(0x5eedULL, 0x9071ULL);
  double scale = 0.0;

  auto deflate = [&](Vector& v, Eigen::Index found) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < found; ++j) v -= out.vectors.col(j).dot(v) * out.vectors.col(j);
    }
  };

  for (Eigen::Index k = 0; k < count; ++k) {
    Vector v = standard_normal(start_rng, n);
    deflate(v, k);
    v.normalize();
    double lambda = 0.0;
    double residual = 0.0;
    bool converged = false;
    for (long it = 0; it < max_iter; ++it) {
      Vector w = a * v;
      deflate(w, k);
      lambda = v.dot(w);
      residual = (w - lambda * v).norm();
      const double ref = k == 0 ? std::abs(lambda) : scale;
      if (residual <= tol * ref || w.norm() == 0.0) {
        converged = true;
        break;
      }
      v = w / w.norm();
      deflate(v, k);
      v.normalize();
    }
    if (!converged) {
      throw ConvergenceError("power_iteration: eigenpair " + std::to_string(k) +
                                 " not converged after " + std::to_string(max_iter) + " iterations",
                             residual);
    }
    if (k == 0) scale = std::abs(lambda);
    out.values(k) = lambda;
    out.vectors.col(k) = v;
  }
  return out;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  auto seq = make_seed_seq(seed, stream);
  engine_.seed(seq);
}

RngStream RngStream::substream(std::uint64_t id) const {
  return RngStream(seed_, splitmix64(stream_ ^ splitmix64(id + 0x632be59bd9b4e019ULL)));
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_index: empty range");
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

void RngStream::fill_normal(std::span<double> out) {
  for (auto& x : out) x = normal();
}

void RngStream::fill_normal(std::span<float> out) {
  for (auto& x : out) x = static_cast<float>(normal());
}

Vector standard_normal(RngStream& rng, Eigen::Index count) {
  if (count < 0) throw ArgumentError("standard_normal: negative count");
  Vector v(count);
  rng.fill_normal(std::span<double>(v.data(), static_cast<std::size_t>(count)));
  return v;
}

double relative_frobenius(const Matrix& a, const Matrix& b) {
  const double denom = b.norm();
  if (denom == 0.0) return a.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (a - b).norm() / denom;
}

}  // namespace ntk
