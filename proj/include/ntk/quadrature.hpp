#pragma once

#include <functional>

#include "ntk/numerics.hpp"

namespace ntk {

/// Gauss rule for a probability measure: sum(weights) == 1.
struct QuadratureRule {
  int order = 0;
  Vector nodes;
  Vector weights;
};

inline constexpr int kMaxQuadratureOrder = 200;

/// Probabilists' Gauss-Hermite rule against the N(0, 1) density. Exact for
/// polynomials of degree <= 2 * order - 1. Cached per order; 1 <= order <= 200.
const QuadratureRule& gauss_hermite(int order);

/// Gauss rule for the half-normal law (|Z|, Z ~ N(0, 1)) on [0, inf).
/// Recurrence coefficients come from a discretized Stieltjes procedure.
const QuadratureRule& half_gauss_hermite(int order);

/// Gauss-Laguerre rule for the Exp(1) law on [0, inf).
const QuadratureRule& gauss_laguerre(int order);

/// Gauss-Legendre rule for the uniform law on [0, 1].
const QuadratureRule& gauss_legendre(int order);

/// E[g(Z)], Z ~ N(0, 1), splitting the line at 0 so that integrands with a
/// kink at the origin (relu and friends) still converge spectrally.
double expect_normal(const std::function<double(double)>& g, int order);

/// Standard normal moment E[Z^p] = (p - 1)!! for even p, 0 for odd p.
double normal_moment(int p);

}  // namespace ntk
