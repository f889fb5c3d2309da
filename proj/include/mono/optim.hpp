#pragma once

#include <vector>

#include "mono/model.hpp"

namespace mono {

// Linear warmup 0 -> 1 over floor(warmup_fraction * total) steps, then linear
// decay 1 -> 0 at step = total.
double warmup_linear(size_t step, size_t total, double warmup_fraction);

// Scales all gradients so the global L2 norm does not exceed max_norm;
// returns the pre-clip norm.
double clip_grad_norm(const std::vector<ParamRef>& params, double max_norm);

// Decoupled-weight-decay Adam. Decay multiplies the parameter directly; the
// moment update never sees it.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // One update over params (gradients read from each tensor's grad field).
  // Throws on non-finite gradients, naming the offending parameter.
  void step(const std::vector<ParamRef>& params, double lr_t, double weight_decay);

  size_t steps_taken() const { return t_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double beta1_, beta2_, eps_;
  size_t t_ = 0;
  std::vector<Moments> state_;
};

}  // namespace mono
