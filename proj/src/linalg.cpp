#include "mono/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mono {

Tensor mat_mul(const Tensor& a, const Tensor& b) {
  check(a.ndim() == 2 && b.ndim() == 2 && a.shape[1] == b.shape[0],
        "mat_mul: incompatible shapes: ", a.shape_str(), " vs ", b.shape_str());
  const size_t m = a.shape[0], k = a.shape[1], p = b.shape[1];
  Tensor c = Tensor::zeros({m, p});
  for (size_t i = 0; i < m; ++i)
    for (size_t l = 0; l < k; ++l) {
      const double x = a.v[i * k + l];
      if (x == 0.0) continue;
      for (size_t j = 0; j < p; ++j) c.v[i * p + j] += x * b.v[l * p + j];
    }
  return c;
}

Tensor mat_transpose(const Tensor& a) {
  check(a.ndim() == 2, "mat_transpose: need 2-d, got ", a.shape_str());
  const size_t r = a.shape[0], c = a.shape[1];
  Tensor t = Tensor::zeros({c, r});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) t.v[j * r + i] = a.v[i * c + j];
  return t;
}

std::vector<double> mat_vec(const Tensor& a, const std::vector<double>& x) {
  check(a.ndim() == 2 && a.shape[1] == x.size(), "mat_vec: shape mismatch: ", a.shape_str(),
        " vs vector of length ", x.size());
  const size_t r = a.shape[0], c = a.shape[1];
  std::vector<double> y(r, 0.0);
  for (size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < c; ++j) acc += a.v[i * c + j] * x[j];
    y[i] = acc;
  }
  return y;
}

Tensor chol_solve_spd(const Tensor& s, const Tensor& b) {
  check(s.ndim() == 2 && s.shape[0] == s.shape[1], "chol_solve_spd: S must be square, got ",
        s.shape_str());
  check(b.ndim() == 2 && b.shape[0] == s.shape[0],
        "chol_solve_spd: B row count must match S, got ", b.shape_str());
  const size_t n = s.shape[0], m = b.shape[1];

  // Lower Cholesky factor.
  Tensor l = Tensor::zeros({n, n});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      double acc = s.v[i * n + j];
      for (size_t k = 0; k < j; ++k) acc -= l.v[i * n + k] * l.v[j * n + k];
      if (i == j) {
        check(acc > 0.0, "chol_solve_spd: matrix not positive definite at pivot ", i,
              " (value ", acc, ")");
        l.v[i * n + i] = std::sqrt(acc);
      } else {
        l.v[i * n + j] = acc / l.v[j * n + j];
      }
    }
  }

  // Solve L Y = B, then L^T X = Y, column by column.
  Tensor x = b;
  for (size_t col = 0; col < m; ++col) {
    for (size_t i = 0; i < n; ++i) {
      double acc = x.v[i * m + col];
      for (size_t k = 0; k < i; ++k) acc -= l.v[i * n + k] * x.v[k * m + col];
      x.v[i * m + col] = acc / l.v[i * n + i];
    }
    for (size_t ii = n; ii-- > 0;) {
      double acc = x.v[ii * m + col];
      for (size_t k = ii + 1; k < n; ++k) acc -= l.v[k * n + ii] * x.v[k * m + col];
      x.v[ii * m + col] = acc / l.v[ii * n + ii];
    }
  }
  return x;
}

std::vector<double> sym_eigenvalues(const Tensor& s) {
  check(s.ndim() == 2 && s.shape[0] == s.shape[1], "sym_eigenvalues: need square matrix, got ",
        s.shape_str());
  const size_t n = s.shape[0];
  Tensor a = s;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) off += a.v[i * n + j] * a.v[i * n + j];
    if (off < 1e-24) break;
    for (size_t p = 0; p < n; ++p)
      for (size_t q = p + 1; q < n; ++q) {
        const double apq = a.v[p * n + q];
        if (std::fabs(apq) < 1e-300) continue;
        const double app = a.v[p * n + p], aqq = a.v[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (size_t k = 0; k < n; ++k) {
          const double akp = a.v[k * n + p], akq = a.v[k * n + q];
          a.v[k * n + p] = c * akp - sn * akq;
          a.v[k * n + q] = sn * akp + c * akq;
        }
        for (size_t k = 0; k < n; ++k) {
          const double apk = a.v[p * n + k], aqk = a.v[q * n + k];
          a.v[p * n + k] = c * apk - sn * aqk;
          a.v[q * n + k] = sn * apk + c * aqk;
        }
      }
  }

  std::vector<double> eig(n);
  for (size_t i = 0; i < n; ++i) eig[i] = a.v[i * n + i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace mono
