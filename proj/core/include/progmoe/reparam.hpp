#pragma once

#include <cmath>

// Smooth maps from unconstrained optimizer coordinates to constrained values.
namespace progmoe::reparam {

inline double softplus(double x) { return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

/// Inverse of sigmoid for y in (0, 1).
inline double logit(double y) { return std::log(y / (1.0 - y)); }

}  // namespace progmoe::reparam
