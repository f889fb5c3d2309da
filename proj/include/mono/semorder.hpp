#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mono/rng.hpp"
#include "mono/tensor.hpp"

namespace mono {

// A pair of hidden states where `strong` is expected to dominate `weak`
// along the semantic axes being fit.
struct OrderedPair {
  std::vector<double> weak;
  std::vector<double> strong;
};

// Fixed semantic-axes matrix A (p x d), its right inverse Adag (d x p) with
// A * Adag = I_p, and the preorder h <= h' iff A h <= A h' elementwise.
// Immutable after construction; safe to share across threads.
class SemanticOrder {
 public:
  // Coordinatewise order: p = d, A = Adag = I.
  static SemanticOrder identity(size_t d);

  // Fixed axes from a caller-supplied full-row-rank A. Adag is computed as
  // A^T (A A^T)^{-1} via a Cholesky solve.
  static SemanticOrder from_matrix(Tensor a);

  // Fit p axis rows from ordered pairs: perceptron updates on difference
  // vectors, one row at a time, deflating fitted directions out of the
  // differences, followed by row orthonormalization.
  static SemanticOrder fit_axes(const std::vector<OrderedPair>& pairs, size_t p, size_t d);

  // Plain-text matrix file: first line "p d", then p rows of d reals.
  static SemanticOrder load(const std::string& path);
  void save(const std::string& path) const;

  size_t p() const { return a_.shape[0]; }
  size_t d() const { return a_.shape[1]; }
  const Tensor& a() const { return a_; }
  const Tensor& adag() const { return adag_; }

  // s = A h
  std::vector<double> project(const std::vector<double>& h) const;
  // h = Adag s
  std::vector<double> lift(const std::vector<double>& s) const;

  // True iff every coordinate of A (h' - h) >= -1e-12.
  bool preceq(const std::vector<double>& h, const std::vector<double>& h_prime) const;

  // max |A Adag - I_p|; < 1e-8 by construction.
  double right_inverse_residual() const;
  double smallest_singular_value() const;

  static constexpr double kPreceqTol = 1e-12;
  static constexpr double kResidualTol = 1e-8;
  static constexpr double kRankTol = 1e-8;

 private:
  SemanticOrder(Tensor a, Tensor adag) : a_(std::move(a)), adag_(std::move(adag)) {}
  static Tensor right_inverse(const Tensor& a);
  void validate() const;

  Tensor a_;     // p x d
  Tensor adag_;  // d x p
};

// Random matrix with orthonormal rows (Gram-Schmidt on Gaussian rows).
Tensor random_orthonormal_rows(size_t p, size_t d, Rng& rng);

struct SyntheticPairs {
  std::vector<OrderedPair> pairs;
  Tensor true_axes;  // p x d, orthonormal rows
};

// Ordered pairs planted along random orthonormal axes: strong = weak + R^T c
// with c > 0 elementwise, so every true axis has positive margin on every pair.
SyntheticPairs make_synthetic_ordered_pairs(size_t p, size_t d, size_t count, Rng& rng);

}  // namespace mono
