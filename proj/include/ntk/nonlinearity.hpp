#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntk/numerics.hpp"

namespace ntk {

enum class NonlinearityKind { relu, erf, tanh, polynomial, custom };

/// Scalar nonlinearity sigma together with its derivative.
///
/// relu uses the convention sigma'(0) = 0. Custom maps are held through
/// shared pointers so that Nonlinearity stays a cheap value type.
class Nonlinearity {
 public:
  using ScalarMap = std::function<double(double)>;

  static Nonlinearity relu();
  static Nonlinearity erf();
  static Nonlinearity tanh();
  /// sigma(x) = c0 + c1 x + c2 x^2 + ...
  static Nonlinearity polynomial(std::vector<double> coeffs);
  static Nonlinearity custom(std::string name, ScalarMap value, ScalarMap derivative,
                             double lipschitz_bound);

  /// "relu" | "erf" | "tanh" | "poly:c0,c1,...".
  static Nonlinearity parse(std::string_view spec);

  NonlinearityKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  /// Infinite for non-constant polynomials.
  double lipschitz_bound() const noexcept { return lipschitz_; }
  bool is_polynomial() const noexcept { return kind_ == NonlinearityKind::polynomial; }

  double apply(double x) const;
  double apply_dot(double x) const;

 private:
  Nonlinearity(NonlinearityKind kind, std::string name, double lipschitz)
      : kind_(kind), name_(std::move(name)), lipschitz_(lipschitz) {}

  NonlinearityKind kind_;
  std::string name_;
  double lipschitz_;
  std::vector<double> coeffs_;
  std::shared_ptr<const ScalarMap> value_;
  std::shared_ptr<const ScalarMap> derivative_;
};

/// Covariance of a centred Gaussian pair (X, Y).
struct Cov2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  static Cov2 standardized(double rho) { return {1.0, rho, 1.0}; }
  Cov2 swapped() const { return {yy, xy, xx}; }
};

inline constexpr int kDefaultDualOrder = 80;

struct DualMethod {
  enum class Kind { closed_form, quadrature };
  Kind kind = Kind::quadrature;
  int order = kDefaultDualOrder;

  static DualMethod closed_form() { return {Kind::closed_form, 0}; }
  static DualMethod quadrature(int order = kDefaultDualOrder) { return {Kind::quadrature, order}; }
  /// Closed form where one exists (relu), quadrature otherwise.
  static DualMethod preferred(const Nonlinearity& nl);
};

/// The Gaussian dual of sigma at fixed variances: rho -> E[sigma(X) sigma(Y)]
/// with Var X = variance_x, Var Y = variance_y and correlation rho.
class DualActivation {
 public:
  DualActivation(Nonlinearity source, double variance_x, double variance_y,
                 std::optional<DualMethod> method = std::nullopt);

  double operator()(double rho) const;
  /// Same expectation with sigma' in place of sigma.
  double dot(double rho) const;

  const Nonlinearity& source() const noexcept { return nl_; }
  const DualMethod& method() const noexcept { return method_; }

 private:
  Nonlinearity nl_;
  double vx_;
  double vy_;
  DualMethod method_;
};

/// E[sigma(X) sigma(Y)] for (X, Y) ~ N(0, cov).
double dual(const Nonlinearity& nl, const Cov2& cov, std::optional<DualMethod> method = std::nullopt);
/// E[sigma'(X) sigma'(Y)] for (X, Y) ~ N(0, cov).
double dual_dot(const Nonlinearity& nl, const Cov2& cov,
                std::optional<DualMethod> method = std::nullopt);

/// Expansion mu = sum_i a_i h_i of mu(x) = sigma(scale * x) in Hermite
/// polynomials normalized so that E[h_i(Z)^2] = 1.
struct HermiteExpansion {
  Vector coefficients;
  int order = 0;
  double scale = 1.0;
  /// E[mu(Z)^2].
  double second_moment = 0.0;
  /// E[mu^2] - sum a_i^2: the mass the truncation leaves out (Bessel gap).
  double tail_mass = 0.0;
};

inline constexpr int kMaxHermiteOrder = 200;

/// Normalized probabilists' Hermite values h_0(x)..h_order(x).
Vector hermite_values(double x, int order);

HermiteExpansion hermite_expand(const Nonlinearity& nl, double scale, int order);

/// Truncated power series sum_i a_i^2 rho^i.
double dual_from_expansion(const HermiteExpansion& he, double rho);

enum class PdVerdict { certified_pd_truncated, not_pd_polynomial, inconclusive };

std::string to_string(PdVerdict v);

struct PdCertificate {
  int even_nonzero_count = 0;
  int odd_nonzero_count = 0;
  double threshold = 0.0;
  PdVerdict verdict = PdVerdict::inconclusive;
  /// Power-series coefficients b_n of rho -> Sigma^(2) on the unit sphere.
  Vector series;
};

/// Truncated positive-definiteness certificate for Sigma^(2) (and hence the
/// limiting NTK for depth >= 2) on the unit sphere S^{n0 - 1}.
PdCertificate pd_certificate(const Nonlinearity& nl, int n0, double beta, int order,
                             double threshold);

}  // namespace ntk
