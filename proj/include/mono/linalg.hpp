#pragma once

#include <vector>

#include "mono/tensor.hpp"

namespace mono {

// Plain (tape-free) dense kernels for small matrices.

Tensor mat_mul(const Tensor& a, const Tensor& b);
Tensor mat_transpose(const Tensor& a);
std::vector<double> mat_vec(const Tensor& a, const std::vector<double>& x);

// Solve S X = B for symmetric positive definite S via Cholesky.
// Throws if S is not positive definite at working precision.
Tensor chol_solve_spd(const Tensor& s, const Tensor& b);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> sym_eigenvalues(const Tensor& s);

}  // namespace mono
