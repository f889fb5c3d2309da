#pragma once

#include <cmath>

namespace mono {

// Numerically stable softplus: log(1 + e^v). For large positive v the naive
// form overflows; the v + log1p(e^-v) branch is exact there.
inline double softplus(double v) {
  if (v > 0.0) return v + std::log1p(std::exp(-v));
  return std::log1p(std::exp(v));
}

inline double sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

// d/dv softplus(v) = sigmoid(v)
inline double softplus_grad(double v) { return sigmoid(v); }

inline double sigmoid_grad_from_value(double s) { return s * (1.0 - s); }
inline double tanh_grad_from_value(double t) { return 1.0 - t * t; }

}  // namespace mono
