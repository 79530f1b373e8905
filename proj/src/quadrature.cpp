#include "ntk/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

namespace ntk {

namespace {

// Three-term recurrence of monic orthogonal polynomials:
//   p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x),  beta_0 = total mass.
struct Recurrence {
  std::vector<double> alpha;
  std::vector<double> beta;
};

// Orthonormal polynomial values p_0..p_{n-1} at x; returns p_n and p_n'.
struct OrthoEval {
  double sum_sq = 0.0;
  double pn = 0.0;
  double dpn = 0.0;
};

OrthoEval eval_orthonormal(const Recurrence& rec, int n, double x) {
  OrthoEval e;
  double prev = 0.0, dprev = 0.0;
  double cur = 1.0 / std::sqrt(rec.beta[0]), dcur = 0.0;
  for (int k = 0; k < n; ++k) {
    e.sum_sq += cur * cur;
    const double sb_next = std::sqrt(rec.beta[k + 1]);
    const double sb = k == 0 ? 0.0 : std::sqrt(rec.beta[k]);
    const double next = ((x - rec.alpha[k]) * cur - sb * prev) / sb_next;
    const double dnext = (cur + (x - rec.alpha[k]) * dcur - sb * dprev) / sb_next;
    prev = cur;
    dprev = dcur;
    cur = next;
    dcur = dnext;
  }
  e.pn = cur;
  e.dpn = dcur;
  return e;
}

// Golub-Welsch for the nodes, Newton polish on the orthonormal recurrence,
// and Christoffel numbers 1 / sum_k p_k(x)^2 for weights (relative accuracy
// survives even for the tiny outer weights).
QuadratureRule rule_from_recurrence(const Recurrence& rec, int n) {
  Vector diag(n), sub(std::max(n - 1, 0));
  for (int k = 0; k < n; ++k) diag(k) = rec.alpha[k];
  for (int k = 0; k + 1 < n; ++k) sub(k) = std::sqrt(rec.beta[k + 1]);
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("quadrature: tridiagonal eigensolver failed for order " +
                         std::to_string(n));
  }
  QuadratureRule rule{n, solver.eigenvalues(), Vector(n)};
  for (int i = 0; i < n; ++i) {
    double x = rule.nodes(i);
    for (int it = 0; it < 3; ++it) {
      const auto e = eval_orthonormal(rec, n, x);
      if (e.dpn == 0.0) break;
      const double step = e.pn / e.dpn;
      if (!std::isfinite(step) || std::abs(step) > 1e-6 * (1.0 + std::abs(x))) break;
      x -= step;
    }
    rule.nodes(i) = x;
    rule.weights(i) = 1.0 / eval_orthonormal(rec, n, x).sum_sq;
  }
  rule.weights /= rule.weights.sum();
  return rule;
}

Recurrence hermite_recurrence(int n) {
  Recurrence r{std::vector<double>(n + 1, 0.0), std::vector<double>(n + 1)};
  r.beta[0] = 1.0;
  for (int k = 1; k <= n; ++k) r.beta[k] = k;
  return r;
}

Recurrence laguerre_recurrence(int n) {
  Recurrence r{std::vector<double>(n + 1), std::vector<double>(n + 1)};
  r.beta[0] = 1.0;
  for (int k = 0; k <= n; ++k) {
    r.alpha[k] = 2.0 * k + 1.0;
    if (k > 0) r.beta[k] = static_cast<double>(k) * k;
  }
  return r;
}

// Uniform law on [0, 1]: shifted Legendre.
Recurrence legendre_recurrence(int n) {
  Recurrence r{std::vector<double>(n + 1, 0.5), std::vector<double>(n + 1)};
  r.beta[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    const double kk = static_cast<double>(k) * k;
    r.beta[k] = 0.25 * kk / (4.0 * kk - 1.0);
  }
  return r;
}

// Discretized Stieltjes procedure for the half-normal law: the measure is
// replaced by a composite Gauss-Legendre sum on [0, 40] (mass beyond 40 is
// below 1e-340), then the recurrence is read off by Lanczos-style
// orthonormalization of the discrete polynomial vectors.
Recurrence half_normal_recurrence(int n) {
  constexpr int kPanels = 400;
  constexpr double kUpper = 40.0;
  const auto& leg = gauss_legendre(24);
  const double h = kUpper / kPanels;
  const double density = 2.0 / std::sqrt(2.0 * std::numbers::pi);
  const auto m = static_cast<Eigen::Index>(kPanels) * leg.order;
  Vector z(m), w(m);
  for (int p = 0; p < kPanels; ++p) {
    for (int q = 0; q < leg.order; ++q) {
      const auto i = static_cast<Eigen::Index>(p) * leg.order + q;
      z(i) = h * (p + leg.nodes(q));
      w(i) = h * leg.weights(q) * density * std::exp(-0.5 * z(i) * z(i));
    }
  }
  Recurrence r{std::vector<double>(n + 1), std::vector<double>(n + 1)};
  const Vector sw = w.cwiseSqrt();
  r.beta[0] = w.sum();
  Vector prev = Vector::Zero(m);
  Vector cur = sw / std::sqrt(r.beta[0]);
  for (int k = 0; k <= n; ++k) {
    r.alpha[k] = cur.dot(z.cwiseProduct(cur));
    Vector next = z.cwiseProduct(cur) - r.alpha[k] * cur;
    if (k > 0) next -= std::sqrt(r.beta[k]) * prev;
    // Full reorthogonalization against the two previous vectors.
    next -= cur.dot(next) * cur;
    if (k > 0) next -= prev.dot(next) * prev;
    const double nrm = next.norm();
    if (k + 1 <= n) r.beta[k + 1] = nrm * nrm;
    prev = cur;
    cur = next / nrm;
  }
  return r;
}

class RuleCache {
 public:
  template <typename Make>
  const QuadratureRule& get(int order, Make make) {
    std::lock_guard lock(mu_);
    auto it = rules_.find(order);
    if (it == rules_.end()) {
      it = rules_.emplace(order, std::make_unique<QuadratureRule>(make(order))).first;
    }
    return *it->second;
  }

 private:
  std::mutex mu_;
  std::map<int, std::unique_ptr<QuadratureRule>> rules_;
};

void check_order(const char* name, int order) {
  if (order < 1 || order > kMaxQuadratureOrder) {
    throw ArgumentError(std::string(name) + ": order " + std::to_string(order) +
                        " outside [1, " + std::to_string(kMaxQuadratureOrder) + "]");
  }
}

}  // namespace

const QuadratureRule& gauss_hermite(int order) {
  check_order("gauss_hermite", order);
  static RuleCache cache;
  return cache.get(order, [](int n) {
    auto rule = rule_from_recurrence(hermite_recurrence(n), n);
    // Enforce exact symmetry about 0.
    for (int i = 0; i < n / 2; ++i) {
      const double x = 0.5 * (rule.nodes(n - 1 - i) - rule.nodes(i));
      const double wt = 0.5 * (rule.weights(i) + rule.weights(n - 1 - i));
      rule.nodes(i) = -x;
      rule.nodes(n - 1 - i) = x;
      rule.weights(i) = rule.weights(n - 1 - i) = wt;
    }
    if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
    return rule;
  });
}

const QuadratureRule& half_gauss_hermite(int order) {
  check_order("half_gauss_hermite", order);
  static RuleCache cache;
  return cache.get(order, [](int n) { return rule_from_recurrence(half_normal_recurrence(n), n); });
}

const QuadratureRule& gauss_laguerre(int order) {
  check_order("gauss_laguerre", order);
  static RuleCache cache;
  return cache.get(order, [](int n) { return rule_from_recurrence(laguerre_recurrence(n), n); });
}

const QuadratureRule& gauss_legendre(int order) {
  check_order("gauss_legendre", order);
  static RuleCache cache;
  return cache.get(order, [](int n) { return rule_from_recurrence(legendre_recurrence(n), n); });
}

double expect_normal(const std::function<double(double)>& g, int order) {
  const auto& rule = half_gauss_hermite(order);
  double acc = 0.0;
  for (int i = 0; i < rule.order; ++i) {
    acc += rule.weights(i) * (g(rule.nodes(i)) + g(-rule.nodes(i)));
  }
  return 0.5 * acc;
}

double normal_moment(int p) {
  if (p < 0) throw ArgumentError("normal_moment: negative power");
  if (p % 2 == 1) return 0.0;
  double m = 1.0;
  for (int k = p - 1; k > 1; k -= 2) m *= k;
  return m;
}

}  // namespace ntk
