#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "mono/common.hpp"

namespace mono {

// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 and 2 cover
// everything this project needs. `grad`, when present, always has the same
// number of elements as `v`.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> v;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  Tensor() = default;

  size_t numel() const {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    return n;
  }
  size_t ndim() const { return shape.size(); }
  bool is_scalar() const { return shape.empty(); }

  size_t rows() const {
    check(ndim() == 2, "rows(): tensor is not 2-d");
    return shape[0];
  }
  size_t cols() const {
    check(ndim() == 2, "cols(): tensor is not 2-d");
    return shape[1];
  }

  double& at(size_t i, size_t j) { return v[i * shape[1] + j]; }
  double at(size_t i, size_t j) const { return v[i * shape[1] + j]; }

  double scalar_value() const {
    check(is_scalar(), "scalar_value(): tensor has shape ", shape_str());
    return v[0];
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  Tensor& set_requires_grad(bool b = true) {
    requires_grad = b;
    return *this;
  }

  void ensure_grad() {
    if (!grad) grad = std::vector<double>(v.size(), 0.0);
  }
  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  }

  static Tensor zeros(std::vector<size_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.v.assign(t.numel(), 0.0);
    return t;
  }
  static Tensor full(std::vector<size_t> shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }
  static Tensor scalar(double value) {
    Tensor t;
    t.v.assign(1, value);
    return t;
  }
  static Tensor vec(std::vector<double> values) {
    Tensor t;
    t.shape = {values.size()};
    t.v = std::move(values);
    return t;
  }
  static Tensor matrix(size_t r, size_t c, std::vector<double> values) {
    Tensor t;
    t.shape = {r, c};
    t.v = std::move(values);
    check(t.v.size() == r * c, "matrix(): ", r * c, " values expected, got ", t.v.size());
    return t;
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace mono
