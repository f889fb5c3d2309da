#include "mono/optim.hpp"

#include <cmath>

namespace mono {

double warmup_linear(size_t step, size_t total, double warmup_fraction) {
  check(total > 0, "warmup_linear: total steps must be positive");
  check(warmup_fraction >= 0.0 && warmup_fraction < 1.0,
        "warmup_linear: fraction must be in [0, 1)");
  const size_t warmup = size_t(warmup_fraction * double(total));
  if (step >= total) return 0.0;
  if (warmup > 0 && step < warmup) return double(step) / double(warmup);
  return double(total - step) / double(total - warmup);
}

double clip_grad_norm(const std::vector<ParamRef>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.t->grad) continue;
    for (double g : *p.t->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& p : params) {
      if (!p.t->grad) continue;
      for (double& g : *p.t->grad) g *= scale;
    }
  }
  return norm;
}

void AdamW::step(const std::vector<ParamRef>& params, double lr_t, double weight_decay) {
  if (state_.empty()) {
    state_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state_[i].m.assign(params[i].t->v.size(), 0.0);
      state_[i].v.assign(params[i].t->v.size(), 0.0);
    }
  }
  check(state_.size() == params.size(), "adamw: parameter list changed size mid-run");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));

  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].t;
    t.ensure_grad();
    check(t.grad->size() == t.v.size(), "adamw: gradient size mismatch for ", params[i].name);
    auto& mom = state_[i];
    for (size_t k = 0; k < t.v.size(); ++k) {
      const double g = (*t.grad)[k];
      check(std::isfinite(g), "adamw: non-finite gradient in parameter '", params[i].name, "'");
      mom.m[k] = beta1_ * mom.m[k] + (1.0 - beta1_) * g;
      mom.v[k] = beta2_ * mom.v[k] + (1.0 - beta2_) * g * g;
      const double mhat = mom.m[k] / bc1;
      const double vhat = mom.v[k] / bc2;
      t.v[k] -= lr_t * weight_decay * t.v[k];
      t.v[k] -= lr_t * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace mono
