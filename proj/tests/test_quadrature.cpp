#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ntk/quadrature.hpp"

using namespace ntk;

TEST_CASE("order-2 Gauss-Hermite rule") {
  // Matching E[1] = 1 and E[X^2] = 1 with two symmetric nodes forces +-1, 1/2.
  const auto& r = gauss_hermite(2);
  CHECK(r.nodes(0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(r.nodes(1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.weights(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.weights(1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("Gauss-Hermite normalization and symmetry for every order") {
  for (int k = 1; k <= kMaxQuadratureOrder; ++k) {
    const auto& r = gauss_hermite(k);
    CHECK(std::abs(r.weights.sum() - 1.0) <= 1e-12);
    CHECK(std::abs(r.weights.dot(r.nodes)) <= 1e-12);
    CHECK((r.weights.array() > 0.0).all());
    for (int i = 0; i < k; ++i) CHECK(r.nodes(i) == -r.nodes(k - 1 - i));
  }
}

TEST_CASE("Gauss-Hermite integrates monomials up to degree 2k-1") {
  // Absolute 1e-12 for unit-sized moments, relative to E|Z|^p beyond that
  // (moments grow like (p-1)!!; odd moments cancel terms of that size).
  for (int k : {1, 2, 3, 5, 10, 20, 40}) {
    const auto& r = gauss_hermite(k);
    for (int p = 0; p <= 2 * k - 1; ++p) {
      const double exact = normal_moment(p);
      const double scale = normal_moment(p % 2 == 0 ? p : p + 1);
      const double got = r.weights.dot(r.nodes.array().pow(p).matrix());
      CHECK(std::abs(got - exact) <= 1e-12 * std::max(1.0, scale));
    }
  }
  const auto& r20 = gauss_hermite(20);
  CHECK(std::abs(r20.weights.dot(r20.nodes.array().pow(4).matrix()) - 3.0) <= 1e-12);
}

TEST_CASE("Gauss-Hermite order range is enforced") {
  CHECK_THROWS_AS(gauss_hermite(0), ArgumentError);
  CHECK_THROWS_AS(gauss_hermite(201), ArgumentError);
}

TEST_CASE("half-normal rule reproduces half-normal moments") {
  // E|Z|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi).
  for (int k : {4, 20, 80, 200}) {
    const auto& r = half_gauss_hermite(k);
    CHECK(std::abs(r.weights.sum() - 1.0) <= 1e-12);
    for (int p = 0; p <= std::min(2 * k - 1, 30); ++p) {
      const double exact = std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (p + 1)) / std::sqrt(std::numbers::pi);
      const double got = r.weights.dot(r.nodes.array().pow(p).matrix());
      CHECK(std::abs(got - exact) <= 1e-12 * std::max(1.0, exact));
    }
  }
}

TEST_CASE("Laguerre and Legendre rules") {
  for (int k : {3, 20, 80}) {
    const auto& lag = gauss_laguerre(k);
    // E[U^p] = p! for U ~ Exp(1).
    for (int p = 0; p <= std::min(2 * k - 1, 20); ++p) {
      const double exact = std::tgamma(p + 1.0);
      CHECK(std::abs(lag.weights.dot(lag.nodes.array().pow(p).matrix()) - exact) <=
            1e-12 * exact);
    }
    const auto& leg = gauss_legendre(k);
    for (int p = 0; p <= 2 * k - 1; ++p) {
      CHECK(std::abs(leg.weights.dot(leg.nodes.array().pow(p).matrix()) - 1.0 / (p + 1)) <=
            1e-13);
    }
  }
}

TEST_CASE("expect_normal handles a kink at the origin") {
  const double relu_mean = expect_normal([](double z) { return z > 0 ? z : 0.0; }, 20);
  CHECK(std::abs(relu_mean - 1.0 / std::sqrt(2.0 * std::numbers::pi)) <= 1e-14);
  const double abs3 = expect_normal([](double z) { return std::abs(z * z * z); }, 20);
  CHECK(std::abs(abs3 - 2.0 * std::sqrt(2.0 / std::numbers::pi)) <= 1e-13);
  const double cosine = expect_normal([](double z) { return std::cos(z); }, 60);
  CHECK(std::abs(cosine - std::exp(-0.5)) <= 1e-14);
}
