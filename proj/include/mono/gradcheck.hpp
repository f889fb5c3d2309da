#pragma once

#include <functional>

#include "mono/tape.hpp"

namespace mono {

// A differentiable scalar program: given a tape and an input node, build and
// return the scalar output node.
using TapeScalarFn = std::function<Var(Tape&, Var)>;

struct FdCheck {
  double max_rel_err = 0.0;
  Tensor analytic;
  Tensor numeric;
};

// Per-coordinate relative error with denominator max(|a|, |n|, 1e-8).
double rel_err(double analytic, double numeric);
double max_rel_err(const Tensor& analytic, const Tensor& numeric);

// Central finite differences per coordinate of x (step > 0) against the
// reverse-mode gradient of f. Fails on non-finite f(x).
FdCheck finite_diff_check(const TapeScalarFn& f, const Tensor& x, double step = 1e-5);

// Central-difference gradient of a plain scalar function (no tape involved).
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double step = 1e-5);

}  // namespace mono
