#include "ntk/nonlinearity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ntk/quadrature.hpp"

namespace ntk {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRhoSlack = 1e-12;

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double clamp_rho(double rho) {
  if (!std::isfinite(rho) || std::abs(rho) > 1.0 + kRhoSlack) {
    throw ArgumentError("covariance is not positive semi-definite: correlation " +
                        std::to_string(rho));
  }
  return std::clamp(rho, -1.0, 1.0);
}

// E[g(sx Z1) g(sy (rho Z1 + c Z2))] in polar coordinates. The angular range
// [0, pi) is cut where either argument changes sign, so integrands with a
// kink at 0 are smooth on every piece; the radial part is symmetrized
// (r and -r) which makes it a function of u = r^2 / 2 under the Exp(1) law.
template <typename G>
double polar_expectation(G&& g, double sx, double sy, double rho, int order) {
  const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double cuts[4] = {0.0, 0.5 * kPi, std::atan2(-rho, c), kPi};
  if (cuts[2] < 0.0) cuts[2] += kPi;
  std::sort(std::begin(cuts), std::end(cuts));

  const auto& radial = gauss_laguerre(order);
  const auto& angular = gauss_legendre(order);
  double total = 0.0;
  for (int p = 0; p < 3; ++p) {
    const double lo = cuts[p], width = cuts[p + 1] - cuts[p];
    if (width <= 0.0) continue;
    double piece = 0.0;
    for (int j = 0; j < angular.order; ++j) {
      const double theta = lo + width * angular.nodes(j);
      const double a = sx * std::cos(theta);
      const double b = sy * (rho * std::cos(theta) + c * std::sin(theta));
      double ray = 0.0;
      for (int i = 0; i < radial.order; ++i) {
        const double r = std::sqrt(2.0 * radial.nodes(i));
        ray += radial.weights(i) * (g(r * a) * g(r * b) + g(-r * a) * g(-r * b));
      }
      piece += angular.weights(j) * ray;
    }
    total += width * piece;
  }
  return total / (2.0 * kPi);
}

enum class Which { value, derivative };

double relu_closed(Which which, double vx, double vy, double rho) {
  const double angle = kPi - std::acos(rho);
  if (which == Which::derivative) return angle / (2.0 * kPi);
  return std::sqrt(vx * vy) * (std::sqrt(1.0 - rho * rho) + angle * rho) / (2.0 * kPi);
}

double evaluate(const Nonlinearity& nl, Which which, double vx, double vy, double rho,
                const DualMethod& method) {
  if (method.kind == DualMethod::Kind::closed_form) {
    if (nl.kind() != NonlinearityKind::relu) {
      throw ArgumentError("no closed-form dual for nonlinearity '" + nl.name() + "'");
    }
    return relu_closed(which, vx, vy, rho);
  }
  const double sx = std::sqrt(vx), sy = std::sqrt(vy);
  if (which == Which::value) {
    return polar_expectation([&](double t) { return nl.apply(t); }, sx, sy, rho, method.order);
  }
  return polar_expectation([&](double t) { return nl.apply_dot(t); }, sx, sy, rho, method.order);
}

double dual_impl(const Nonlinearity& nl, Which which, const Cov2& cov,
                 std::optional<DualMethod> method) {
  if (!(cov.xx >= 0.0) || !(cov.yy >= 0.0)) {
    throw ArgumentError("covariance has a negative variance");
  }
  if (cov.xx == 0.0 || cov.yy == 0.0) {
    // A degenerate coordinate is identically 0; the expectation vanishes
    // only when the map vanishes there.
    const double at_zero = which == Which::value ? nl.apply(0.0) : nl.apply_dot(0.0);
    if (at_zero == 0.0) return 0.0;
    throw ArgumentError("zero variance in dual of '" + nl.name() + "' whose value at 0 is " +
                        std::to_string(at_zero));
  }
  const double rho = clamp_rho(cov.xy / std::sqrt(cov.xx * cov.yy));
  return evaluate(nl, which, cov.xx, cov.yy, rho, method.value_or(DualMethod::preferred(nl)));
}

}  // namespace

Nonlinearity Nonlinearity::relu() { return Nonlinearity(NonlinearityKind::relu, "relu", 1.0); }

Nonlinearity Nonlinearity::erf() {
  return Nonlinearity(NonlinearityKind::erf, "erf", 2.0 / std::sqrt(kPi));
}

Nonlinearity Nonlinearity::tanh() { return Nonlinearity(NonlinearityKind::tanh, "tanh", 1.0); }

Nonlinearity Nonlinearity::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) throw ArgumentError("polynomial nonlinearity needs at least one coefficient");
  std::ostringstream name;
  name << "poly:";
  for (std::size_t i = 0; i < coeffs.size(); ++i) name << (i ? "," : "") << coeffs[i];
  const bool affine = std::all_of(coeffs.begin() + std::min<std::size_t>(2, coeffs.size()),
                                  coeffs.end(), [](double c) { return c == 0.0; });
  double lip = std::numeric_limits<double>::infinity();
  if (affine) lip = coeffs.size() > 1 ? std::abs(coeffs[1]) : 0.0;
  Nonlinearity nl(NonlinearityKind::polynomial, name.str(), lip);
  nl.coeffs_ = std::move(coeffs);
  return nl;
}

Nonlinearity Nonlinearity::custom(std::string name, ScalarMap value, ScalarMap derivative,
                                  double lipschitz_bound) {
  if (!value || !derivative) throw ArgumentError("custom nonlinearity needs both maps");
  Nonlinearity nl(NonlinearityKind::custom, std::move(name), lipschitz_bound);
  nl.value_ = std::make_shared<const ScalarMap>(std::move(value));
  nl.derivative_ = std::make_shared<const ScalarMap>(std::move(derivative));
  return nl;
}

Nonlinearity Nonlinearity::parse(std::string_view spec) {
  if (spec == "relu") return relu();
  if (spec == "erf") return erf();
  if (spec == "tanh") return tanh();
  if (spec.starts_with("poly:")) {
    std::vector<double> coeffs;
    std::string_view rest = spec.substr(5);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string token(rest.substr(0, comma));
      try {
        std::size_t used = 0;
        coeffs.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ArgumentError("bad polynomial coefficient '" + token + "' in '" + std::string(spec) +
                            "'");
      }
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return polynomial(std::move(coeffs));
  }
  throw ArgumentError("unknown nonlinearity '" + std::string(spec) +
                      "' (expected relu, erf, tanh or poly:c0,c1,...)");
}

double Nonlinearity::apply(double x) const {
  switch (kind_) {
    case NonlinearityKind::relu:
      return x > 0.0 ? x : 0.0;
    case NonlinearityKind::erf:
      return std::erf(x);
    case NonlinearityKind::tanh:
      return std::tanh(x);
    case NonlinearityKind::polynomial:
      return horner(coeffs_, x);
    case NonlinearityKind::custom:
      return (*value_)(x);
  }
  return 0.0;
}

double Nonlinearity::apply_dot(double x) const {
  switch (kind_) {
    case NonlinearityKind::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case NonlinearityKind::erf:
      return 2.0 / std::sqrt(kPi) * std::exp(-x * x);
    case NonlinearityKind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case NonlinearityKind::polynomial: {
      double acc = 0.0;
      for (std::size_t k = coeffs_.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * coeffs_[k];
      return acc;
    }
    case NonlinearityKind::custom:
      return (*derivative_)(x);
  }
  return 0.0;
}

DualMethod DualMethod::preferred(const Nonlinearity& nl) {
  return nl.kind() == NonlinearityKind::relu ? closed_form() : quadrature();
}

DualActivation::DualActivation(Nonlinearity source, double variance_x, double variance_y,
                               std::optional<DualMethod> method)
    : nl_(std::move(source)),
      vx_(variance_x),
      vy_(variance_y),
      method_(method.value_or(DualMethod::preferred(nl_))) {
  if (!(variance_x > 0.0) || !(variance_y > 0.0)) {
    throw ArgumentError("DualActivation needs positive variances");
  }
}

double DualActivation::operator()(double rho) const {
  return evaluate(nl_, Which::value, vx_, vy_, clamp_rho(rho), method_);
}

double DualActivation::dot(double rho) const {
  return evaluate(nl_, Which::derivative, vx_, vy_, clamp_rho(rho), method_);
}

double dual(const Nonlinearity& nl, const Cov2& cov, std::optional<DualMethod> method) {
  return dual_impl(nl, Which::value, cov, method);
}

double dual_dot(const Nonlinearity& nl, const Cov2& cov, std::optional<DualMethod> method) {
  return dual_impl(nl, Which::derivative, cov, method);
}

Vector hermite_values(double x, int order) {
  Vector h(order + 1);
  h(0) = 1.0;
  if (order >= 1) h(1) = x;
  for (int k = 1; k < order; ++k) {
    h(k + 1) = (x * h(k) - std::sqrt(static_cast<double>(k)) * h(k - 1)) / std::sqrt(k + 1.0);
  }
  return h;
}

HermiteExpansion hermite_expand(const Nonlinearity& nl, double scale, int order) {
  if (order < 0 || order > kMaxHermiteOrder) {
    throw ArgumentError("hermite_expand: order " + std::to_string(order) + " outside [0, " +
                        std::to_string(kMaxHermiteOrder) + "]");
  }
  if (!(scale > 0.0)) throw ArgumentError("hermite_expand: scale must be positive");
  // mu * h_i restricted to either half-line is exactly polynomial for relu
  // (degree <= 201), well within the 200-node half-normal rule.
  const auto& rule = half_gauss_hermite(kMaxQuadratureOrder);
  HermiteExpansion he;
  he.order = order;
  he.scale = scale;
  he.coefficients = Vector::Zero(order + 1);
  for (int i = 0; i < rule.order; ++i) {
    for (double z : {rule.nodes(i), -rule.nodes(i)}) {
      const double mu = nl.apply(scale * z);
      const double w = 0.5 * rule.weights(i);
      he.coefficients += (w * mu) * hermite_values(z, order);
      he.second_moment += w * mu * mu;
    }
  }
  he.tail_mass = he.second_moment - he.coefficients.squaredNorm();
  return he;
}

double dual_from_expansion(const HermiteExpansion& he, double rho) {
  if (!std::isfinite(rho) || std::abs(rho) > 1.0 + kRhoSlack) {
    throw ArgumentError("dual_from_expansion: |rho| > 1 (" + std::to_string(rho) + ")");
  }
  rho = std::clamp(rho, -1.0, 1.0);
  double acc = 0.0;
  for (int i = he.order; i >= 0; --i) acc = acc * rho + he.coefficients(i) * he.coefficients(i);
  return acc;
}

std::string to_string(PdVerdict v) {
  switch (v) {
    case PdVerdict::certified_pd_truncated:
      return "certified_pd_truncated";
    case PdVerdict::not_pd_polynomial:
      return "not_pd_polynomial";
    case PdVerdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

PdCertificate pd_certificate(const Nonlinearity& nl, int n0, double beta, int order,
                             double threshold) {
  if (order < 8) throw ArgumentError("pd_certificate: order must be at least 8");
  if (n0 < 1) throw ArgumentError("pd_certificate: n0 must be positive");
  const double scale = std::sqrt(1.0 / n0 + beta * beta);
  const auto he = hermite_expand(nl, scale, order);

  // Sigma^(2)(x, x') = nu(x^T x') with
  //   nu(rho) = beta^2 + sum_i a_i^2 ((s + rho) / (s + 1))^i,  s = n0 beta^2,
  // re-expanded binomially into powers of rho.
  const double s = n0 * beta * beta;
  PdCertificate cert;
  cert.threshold = threshold;
  cert.series = Vector::Zero(order + 1);
  for (int i = 0; i <= order; ++i) {
    const double ai2 = he.coefficients(i) * he.coefficients(i);
    if (ai2 == 0.0) continue;
    const double base = std::log(ai2) - i * std::log1p(s);
    for (int n = 0; n <= i; ++n) {
      if (n < i && s == 0.0) continue;
      const double log_binom =
          std::lgamma(i + 1.0) - std::lgamma(n + 1.0) - std::lgamma(i - n + 1.0);
      const double shift = n < i ? (i - n) * std::log(s) : 0.0;
      cert.series(n) += std::exp(base + log_binom + shift);
    }
  }
  cert.series(0) += beta * beta;

  for (int n = 0; n <= order; ++n) {
    if (cert.series(n) > threshold) (n % 2 == 0 ? cert.even_nonzero_count : cert.odd_nonzero_count)++;
  }
  if (nl.is_polynomial()) {
    cert.verdict = PdVerdict::not_pd_polynomial;
  } else if (cert.even_nonzero_count >= 3 && cert.odd_nonzero_count >= 3) {
    cert.verdict = PdVerdict::certified_pd_truncated;
  }
  return cert;
}

}  // namespace ntk
