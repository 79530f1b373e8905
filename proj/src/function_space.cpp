#include "ntk/function_space.hpp"

#include <cmath>

namespace ntk {

namespace {

void require_same_shape(const FunctionOnData& a, const FunctionOnData& b, const char* what) {
  if (a.points() != b.points() || a.outputs() != b.outputs()) {
    throw ArgumentError(std::string(what) + ": functions are " + std::to_string(a.points()) + " x " +
                        std::to_string(a.outputs()) + " and " + std::to_string(b.points()) + " x " +
                        std::to_string(b.outputs()));
  }
}

void require_matches(const PiOperator& op, const FunctionOnData& f, const char* what) {
  if (f.points() != op.points() || f.outputs() != op.outputs()) {
    throw ArgumentError(std::string(what) + ": function is " + std::to_string(f.points()) + " x " +
                        std::to_string(f.outputs()) + ", operator acts on " + std::to_string(op.points()) +
                        " x " + std::to_string(op.outputs()));
  }
}

Spectrum top_spectrum(const SymMatrix& m, Eigen::Index count) {
  if (m.dim() >= kPowerIterationThreshold && count < m.dim()) return power_iteration(m, count);
  auto s = sym_eig(m);
  return {s.values.head(count), s.vectors.leftCols(count)};
}

Cholesky factor_theta(const KernelGram& theta, const KernelGram& sigma, const FunctionOnData& fstar,
                      const RegressionOptions& options, double& jitter) {
  if (!theta.scalar_block || !sigma.scalar_block) {
    throw ArgumentError("regression_limit expects scalar-block (limiting) Grams");
  }
  if (theta.entries.dim() != sigma.entries.dim() || fstar.points() != theta.entries.dim()) {
    throw ArgumentError("regression_limit: Theta Gram has " + std::to_string(theta.entries.dim()) +
                        " points, Sigma Gram " + std::to_string(sigma.entries.dim()) + ", targets " +
                        std::to_string(fstar.points()));
  }
  jitter = options.jitter.value_or(ridge_jitter(theta.entries));
  if (!(jitter >= 0.0)) throw ArgumentError("regression_limit: jitter must be non-negative");
  return Cholesky(theta.entries, jitter);
}

}  // namespace

FunctionOnData::FunctionOnData(Matrix values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw ArgumentError("function values must be finite");
}

double FunctionOnData::norm() const {
  return points() == 0 ? 0.0 : std::sqrt(values_.squaredNorm() / static_cast<double>(points()));
}

Vector FunctionOnData::flat() const { return values_.transpose().reshaped(); }

FunctionOnData FunctionOnData::from_flat(const Vector& v, Eigen::Index outputs) {
  if (outputs < 1 || v.size() % outputs != 0) throw ArgumentError("flat vector length is not a multiple of n_L");
  return FunctionOnData(v.reshaped(outputs, v.size() / outputs).transpose());
}

FunctionOnData operator+(const FunctionOnData& a, const FunctionOnData& b) {
  require_same_shape(a, b, "operator+");
  return FunctionOnData(a.values_ + b.values_);
}

FunctionOnData operator-(const FunctionOnData& a, const FunctionOnData& b) {
  require_same_shape(a, b, "operator-");
  return FunctionOnData(a.values_ - b.values_);
}

FunctionOnData operator*(double s, const FunctionOnData& f) { return FunctionOnData(s * f.values_); }

double inner(const FunctionOnData& f, const FunctionOnData& g) {
  require_same_shape(f, g, "inner");
  return f.values().cwiseProduct(g.values()).sum() / static_cast<double>(f.points());
}

PiOperator::PiOperator(KernelGram gram)
    : gram_(std::move(gram)), scaled_(gram_.full() / static_cast<double>(gram_.points())) {}

FunctionOnData pi_apply(const PiOperator& op, const FunctionOnData& f) {
  require_matches(op, f, "pi_apply");
  return FunctionOnData::from_flat(op.matrix().matrix() * f.flat(), op.outputs());
}

std::vector<FunctionOnData> kernel_gd_exact(const PiOperator& op, const FunctionOnData& f0,
                                            const FunctionOnData& fstar, const std::vector<double>& times) {
  require_matches(op, f0, "kernel_gd_exact");
  require_matches(op, fstar, "kernel_gd_exact");
  const auto spec = sym_eig(op.matrix());
  const double cutoff = kNullSpaceThreshold * std::max(spec.values(0), 0.0);
  const Vector coeff = spec.vectors.transpose() * (f0 - fstar).flat();
  const Vector target = fstar.flat();

  std::vector<FunctionOnData> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t == 0.0) {
      out.push_back(f0);
      continue;
    }
    Vector scaled = coeff;
    for (Eigen::Index i = 0; i < scaled.size(); ++i) {
      if (spec.values(i) > cutoff) scaled(i) *= std::exp(-t * spec.values(i));
    }
    out.push_back(FunctionOnData::from_flat(target + spec.vectors * scaled, op.outputs()));
  }
  return out;
}

std::vector<Matrix> kernel_gd_exact_at(const PiOperator& op, const Matrix& kappa, const Matrix& f0_query,
                                       const FunctionOnData& f0, const FunctionOnData& fstar,
                                       const std::vector<double>& times) {
  require_matches(op, f0, "kernel_gd_exact_at");
  require_matches(op, fstar, "kernel_gd_exact_at");
  if (!op.gram().scalar_block) throw ArgumentError("kernel_gd_exact_at expects a scalar-block Gram");
  if (kappa.cols() != op.points() || f0_query.rows() != kappa.rows() || f0_query.cols() != op.outputs()) {
    throw ArgumentError("kernel_gd_exact_at: kappa must be M x N and f0_query M x n_L");
  }
  const auto spec = sym_eig(op.matrix());
  const double cutoff = kNullSpaceThreshold * std::max(spec.values(0), 0.0);
  const Matrix coeff = spec.vectors.transpose() * (fstar - f0).values();
  const Matrix kv = kappa * spec.vectors / static_cast<double>(op.points());

  std::vector<Matrix> out;
  out.reserve(times.size());
  for (double t : times) {
    // int_0^t exp(-s lambda) ds, equal to t on the null space.
    Vector w(spec.values.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double l = spec.values(i);
      w(i) = l > cutoff ? -std::expm1(-t * l) / l : t;
    }
    out.push_back(f0_query + kv * w.asDiagonal() * coeff);
  }
  return out;
}

EulerTrajectory kernel_gd_euler(const PiOperator& op, const FunctionOnData& f0, const FunctionOnData& fstar,
                                const EulerOptions& options) {
  require_matches(op, f0, "kernel_gd_euler");
  require_matches(op, fstar, "kernel_gd_euler");
  if (!(options.dt > 0.0)) throw ArgumentError("kernel_gd_euler: dt must be positive");
  if (options.steps < 0) throw ArgumentError("kernel_gd_euler: steps must be non-negative");

  EulerTrajectory traj;
  const double lambda_max = top_spectrum(op.matrix(), 1).values(0);
  traj.stability_number = options.dt * lambda_max;
  if (traj.stability_number >= 2.0) {
    traj.warning = "dt * lambda_max = " + std::to_string(traj.stability_number) + " >= 2: explicit Euler is unstable";
  }

  const Matrix& m = op.matrix().matrix();
  const Vector target = fstar.flat();
  const double scale = 1.0 / std::sqrt(static_cast<double>(op.points()));
  Vector v = f0.flat();
  traj.residuals.reserve(options.steps + 1);
  traj.residuals.push_back((v - target).norm() * scale);
  if (options.keep_every > 0) traj.states.emplace_back(0, f0);
  int growth = 0;
  for (long s = 1; s <= options.steps; ++s) {
    v.noalias() += options.dt * (m * (target - v));
    const double r = (v - target).norm() * scale;
    growth = r > traj.residuals.back() ? growth + 1 : 0;
    traj.residuals.push_back(r);
    if (growth >= 10 || !std::isfinite(r)) throw IntegratorError(s);
    if (options.keep_every > 0 && s % options.keep_every == 0) {
      traj.states.emplace_back(s, FunctionOnData::from_flat(v, op.outputs()));
    }
  }
  traj.final_state = FunctionOnData::from_flat(v, op.outputs());
  return traj;
}

KernelPcaResult kernel_pca(const PiOperator& op, Eigen::Index count) {
  if (count < 1 || count > op.dim()) {
    throw ArgumentError("kernel_pca: count must be in [1, " + std::to_string(op.dim()) + "], got " +
                        std::to_string(count));
  }
  const auto spec = top_spectrum(op.matrix(), count);
  const double root_n = std::sqrt(static_cast<double>(op.points()));
  KernelPcaResult r;
  r.eigenvalues = spec.values;
  for (Eigen::Index i = 0; i < count; ++i) {
    Vector v = spec.vectors.col(i);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0) v = -v;
    r.components.push_back(FunctionOnData::from_flat(root_n * v, op.outputs()));
  }
  return r;
}

Decomposition decompose_along(const FunctionOnData& f_diff, const FunctionOnData& component) {
  require_same_shape(f_diff, component, "decompose_along");
  const double cc = inner(component, component);
  if (!(cc > 0.0)) throw ArgumentError("decompose_along: component has zero norm");
  FunctionOnData g = (inner(f_diff, component) / cc) * component;
  FunctionOnData h = f_diff - g;
  return {std::move(g), std::move(h)};
}

RegressionLimit::RegressionLimit(const KernelGram& theta, const KernelGram& sigma, const FunctionOnData& fstar,
                                 RegressionOptions options)
    : sigma_data_(sigma.entries.matrix()), chol_(factor_theta(theta, sigma, fstar, options, jitter_)) {
  coef_star_ = chol_.solve(fstar.values());
  if (options.f0_on_data) {
    if (options.f0_on_data->rows() != fstar.points() || options.f0_on_data->cols() != fstar.outputs()) {
      throw ArgumentError("regression_limit: f0_on_data has the wrong shape");
    }
    coef_zero_ = chol_.solve(*options.f0_on_data);
  }
}

RegressionPrediction RegressionLimit::predict(const Matrix& kappa_theta, const Matrix& kappa_sigma,
                                              const Vector& sigma_query_diag,
                                              const std::optional<Matrix>& f0_query) const {
  const auto n = sigma_data_.rows(), m = kappa_theta.rows();
  if (kappa_theta.cols() != n || kappa_sigma.rows() != m || kappa_sigma.cols() != n ||
      sigma_query_diag.size() != m) {
    throw ArgumentError("RegressionLimit::predict: cross kernels must be " + std::to_string(m) + " x " +
                        std::to_string(n));
  }
  RegressionPrediction p;
  p.mean = kappa_theta * coef_star_;
  if (coef_zero_) {
    if (!f0_query || f0_query->rows() != m || f0_query->cols() != coef_star_.cols()) {
      throw ArgumentError("RegressionLimit::predict: f0 at the queries is required and must be M x n_L");
    }
    p.mean += *f0_query - kappa_theta * *coef_zero_;
  }
  const Matrix a = chol_.solve(kappa_theta.transpose());  // N x M
  const Matrix sa = sigma_data_ * a;
  p.variance.resize(m);
  for (Eigen::Index q = 0; q < m; ++q) {
    p.variance(q) = sigma_query_diag(q) - 2.0 * a.col(q).dot(kappa_sigma.row(q)) + a.col(q).dot(sa.col(q));
  }
  return p;
}

RegressionPrediction RegressionLimit::predict(const KernelStack& stack, const EmpiricalMeasure& measure,
                                              const Matrix& queries) const {
  if (!stack.has_theta()) throw ArgumentError("RegressionLimit::predict: kernel stack lacks Theta");
  const auto ck = cross_kernel(stack, measure, queries);
  const int top = stack.depth - 1;
  return predict(ck.theta[top], ck.sigma[top], ck.query_sigma_diag[top]);
}

RegressionLimit regression_limit(const KernelGram& theta, const KernelGram& sigma, const FunctionOnData& fstar,
                                 RegressionOptions options) {
  return RegressionLimit(theta, sigma, fstar, std::move(options));
}

}  // namespace ntk
