#include "ntk/limit_kernel.hpp"

#include <string>

namespace ntk {

namespace {

// Kernel values of one pair at every level, given both diagonals.
struct PairTrace {
  std::vector<double> sigma, sigma_dot, theta;
};

struct DiagonalTrace {
  std::vector<double> sigma, theta;
};

class Recursion {
 public:
  Recursion(int depth, double beta, const Nonlinearity& nl, std::optional<DualMethod> method,
            bool with_theta)
      : depth_(depth), beta2_(beta * beta), nl_(nl),
        method_(method.value_or(DualMethod::preferred(nl))), with_theta_(with_theta) {
    if (depth < 1) throw ArgumentError("kernel depth must be at least 1, got " + std::to_string(depth));
    if (!(beta >= 0.0)) throw ArgumentError("beta must be non-negative");
  }

  // inner = x^T x' / n0.
  PairTrace pair(double inner, const DiagonalTrace* dx, const DiagonalTrace* dy) const {
    PairTrace t;
    t.sigma.push_back(inner + beta2_);
    t.sigma_dot.push_back(0.0);
    if (with_theta_) t.theta.push_back(t.sigma.back());
    for (int l = 1; l < depth_; ++l) {
      const double sxx = dx ? dx->sigma[l - 1] : t.sigma[l - 1];
      const double syy = dy ? dy->sigma[l - 1] : t.sigma[l - 1];
      const Cov2 cov{sxx, t.sigma[l - 1], syy};
      t.sigma.push_back(dual(nl_, cov, method_) + beta2_);
      if (with_theta_) {
        const double sd = dual_dot(nl_, cov, method_);
        t.sigma_dot.push_back(sd);
        t.theta.push_back(t.theta[l - 1] * sd + t.sigma[l]);
      }
    }
    return t;
  }

  DiagonalTrace diagonal(double norm2) const {
    auto p = pair(norm2, nullptr, nullptr);
    return {std::move(p.sigma), std::move(p.theta)};
  }

  int depth() const { return depth_; }
  bool with_theta() const { return with_theta_; }

 private:
  int depth_;
  double beta2_;
  const Nonlinearity& nl_;
  DualMethod method_;
  bool with_theta_;
};

// Entrywise dots: a query equal to a data point reproduces its diagonal exactly.
Matrix scaled_inner(const Matrix& a, const Matrix& b, double n0) {
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) out(i, j) = a.row(i).dot(b.row(j)) / n0;
  return out;
}

KernelStack build_stack(const EmpiricalMeasure& measure, int depth, double beta,
                        const Nonlinearity& nl, std::optional<DualMethod> method, bool with_theta) {
  const Recursion rec(depth, beta, nl, method, with_theta);
  const auto n = measure.size();
  const double n0 = static_cast<double>(measure.input_dim());
  const Matrix inner = scaled_inner(measure.points(), measure.points(), n0);

  std::vector<DiagonalTrace> diag;
  diag.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) diag.push_back(rec.diagonal(inner(i, i)));

  KernelStack s;
  s.depth = depth;
  s.beta = beta;
  s.nl = nl;
  s.sigma.assign(depth, Matrix(n, n));
  if (with_theta) {
    s.theta.assign(depth, Matrix(n, n));
    s.sigma_dot.assign(depth, Matrix(n, n));
    s.sigma_dot[0].resize(0, 0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const auto t = rec.pair(inner(i, j), &diag[i], &diag[j]);
      for (int l = 0; l < depth; ++l) {
        s.sigma[l](i, j) = s.sigma[l](j, i) = t.sigma[l];
        if (with_theta) {
          s.theta[l](i, j) = s.theta[l](j, i) = t.theta[l];
          if (l > 0) s.sigma_dot[l](i, j) = s.sigma_dot[l](j, i) = t.sigma_dot[l];
        }
      }
    }
  }
  return s;
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1) throw ArgumentError("empirical measure needs at least one point");
  if (points_.cols() < 1) throw ArgumentError("empirical measure needs input dimension >= 1");
  if (!points_.allFinite()) throw ArgumentError("empirical measure has non-finite coordinates");
}

std::string to_string(GramKind kind) {
  switch (kind) {
    case GramKind::sigma:
      return "sigma";
    case GramKind::theta_limit:
      return "theta_limit";
    case GramKind::theta_empirical:
      return "theta_empirical";
  }
  return "sigma";
}

Matrix KernelGram::full() const {
  if (!scalar_block || n_out == 1) return entries.matrix();
  const auto n = entries.dim();
  Matrix out = Matrix::Zero(n * n_out, n * n_out);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n_out; ++k) out(i * n_out + k, j * n_out + k) = entries(i, j);
  return out;
}

KernelGram KernelStack::sigma_gram(int level, Eigen::Index n_out) const {
  if (level < 1 || level > depth) throw ArgumentError("sigma level out of range");
  return {SymMatrix(sigma[level - 1]), n_out, true, GramKind::sigma, level, {}, 0.0};
}

KernelGram KernelStack::theta_gram(Eigen::Index n_out) const { return theta_gram_at(depth, n_out); }

KernelGram KernelStack::theta_gram_at(int level, Eigen::Index n_out) const {
  if (!has_theta()) throw ArgumentError("kernel stack was built without the NTK");
  if (level < 1 || level > depth) throw ArgumentError("theta level out of range");
  return {SymMatrix(theta[level - 1]), n_out, true, GramKind::theta_limit, level, {}, 0.0};
}

KernelStack sigma_stack(const EmpiricalMeasure& measure, int depth, double beta,
                        const Nonlinearity& nl, std::optional<DualMethod> method) {
  return build_stack(measure, depth, beta, nl, method, false);
}

KernelStack ntk_stack(const EmpiricalMeasure& measure, int depth, double beta,
                      const Nonlinearity& nl, std::optional<DualMethod> method) {
  return build_stack(measure, depth, beta, nl, method, true);
}

CrossKernel cross_kernel(const KernelStack& stack, const EmpiricalMeasure& measure,
                         const Matrix& queries, std::optional<DualMethod> method) {
  if (queries.cols() != measure.input_dim()) {
    throw ArgumentError("cross_kernel: queries have dimension " + std::to_string(queries.cols()) +
                        ", dataset has " + std::to_string(measure.input_dim()));
  }
  if (!queries.allFinite()) throw ArgumentError("cross_kernel: non-finite query");
  if (stack.sigma.empty() || stack.sigma[0].rows() != measure.size()) {
    throw ArgumentError("cross_kernel: kernel stack does not belong to this dataset");
  }
  const bool with_theta = stack.has_theta();
  const Recursion rec(stack.depth, stack.beta, stack.nl, method, with_theta);
  const auto n = measure.size(), m = queries.rows();
  const double n0 = static_cast<double>(measure.input_dim());
  const Matrix inner = scaled_inner(queries, measure.points(), n0);

  std::vector<DiagonalTrace> data_diag(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int l = 0; l < stack.depth; ++l) {
      data_diag[j].sigma.push_back(stack.sigma[l](j, j));
      if (with_theta) data_diag[j].theta.push_back(stack.theta[l](j, j));
    }
  }

  CrossKernel out;
  out.sigma.assign(stack.depth, Matrix(m, n));
  out.query_sigma_diag.assign(stack.depth, Vector(m));
  if (with_theta) {
    out.theta.assign(stack.depth, Matrix(m, n));
    out.query_theta_diag.assign(stack.depth, Vector(m));
  }
  for (Eigen::Index q = 0; q < m; ++q) {
    const auto qd = rec.diagonal(queries.row(q).dot(queries.row(q)) / n0);
    for (int l = 0; l < stack.depth; ++l) {
      out.query_sigma_diag[l](q) = qd.sigma[l];
      if (with_theta) out.query_theta_diag[l](q) = qd.theta[l];
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto t = rec.pair(inner(q, j), &qd, &data_diag[j]);
      for (int l = 0; l < stack.depth; ++l) {
        out.sigma[l](q, j) = t.sigma[l];
        if (with_theta) out.theta[l](q, j) = t.theta[l];
      }
    }
  }
  return out;
}

double min_eigenvalue(const KernelGram& g) {
  const SymMatrix m(g.full());
  const auto s = sym_eig(m);
  return s.values(s.values.size() - 1);
}

}  // namespace ntk
