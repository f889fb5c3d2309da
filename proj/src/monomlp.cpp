#include "mono/monomlp.hpp"

#include <cmath>

#include "mono/scalarops.hpp"

namespace mono {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  fail("unknown activation '", name, "' (expected sigmoid, tanh or relu)");
}

double activation_value(Activation a, double z) {
  switch (a) {
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
  }
  return 0.0;
}

double activation_grad(Activation a, double z) {
  switch (a) {
    case Activation::Sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Relu:
      return z > 0.0 ? 1.0 : 0.0;  // subgradient 0 at the kink
  }
  return 0.0;
}

double default_saturation_threshold(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return 14.0;  // sigmoid'(14) ~ 8.3e-7
    case Activation::Tanh: return 7.5;      // tanh'(7.5) ~ 1.2e-6 / 4 < 1e-6
    case Activation::Relu: break;
  }
  fail("saturation threshold: relu does not saturate as z -> +inf");
}

static void validate_layers_shape(size_t n_layers, const std::vector<size_t>& in_w,
                                  const std::vector<size_t>& out_w) {
  check(n_layers >= 1, "mlp: at least one layer required");
  for (size_t i = 0; i + 1 < n_layers; ++i)
    check(out_w[i] == in_w[i + 1], "mlp: layer ", i, " out width ", out_w[i],
          " does not feed layer ", i + 1, " in width ", in_w[i + 1]);
}

RealizedMlp::RealizedMlp(std::vector<Layer> layers, Activation act)
    : layers_(std::move(layers)), act_(act) {
  std::vector<size_t> in_w, out_w;
  for (const auto& l : layers_) {
    check(l.w.ndim() == 2, "mlp: weight must be 2-d");
    check(l.b.ndim() == 1 && l.b.shape[0] == l.w.shape[0], "mlp: bias width mismatch");
    in_w.push_back(l.w.shape[1]);
    out_w.push_back(l.w.shape[0]);
  }
  validate_layers_shape(layers_.size(), in_w, out_w);
}

std::vector<double> RealizedMlp::forward(const std::vector<double>& s) const {
  check(s.size() == in_width(), "mlp forward: expected input width ", in_width(), ", got ",
        s.size());
  std::vector<double> a = s;
  for (size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    const size_t m = l.w.shape[0], n = l.w.shape[1];
    std::vector<double> z(m);
    for (size_t i = 0; i < m; ++i) {
      double acc = l.b.v[i];
      for (size_t j = 0; j < n; ++j) acc += l.w.v[i * n + j] * a[j];
      z[i] = acc;
    }
    if (li + 1 < layers_.size())
      for (double& x : z) x = activation_value(act_, x);
    a = std::move(z);
  }
  return a;
}

Tensor RealizedMlp::jacobian(const std::vector<double>& s) const {
  check(s.size() == in_width(), "mlp jacobian: expected input width ", in_width(), ", got ",
        s.size());
  // J = W_k diag(act'(z_{k-1})) W_{k-1} ... diag(act'(z_0)) W_0
  Tensor jac = layers_.front().w;
  std::vector<double> a = s;
  for (size_t li = 0; li + 1 < layers_.size(); ++li) {
    const auto& l = layers_[li];
    const size_t m = l.w.shape[0], n = l.w.shape[1];
    std::vector<double> z(m);
    for (size_t i = 0; i < m; ++i) {
      double acc = l.b.v[i];
      for (size_t j = 0; j < n; ++j) acc += l.w.v[i * n + j] * a[j];
      z[i] = acc;
    }
    // Scale current jacobian rows by act'(z), then left-multiply next W.
    const size_t cols = jac.shape[1];
    for (size_t i = 0; i < m; ++i) {
      const double dz = activation_grad(act_, z[i]);
      for (size_t j = 0; j < cols; ++j) jac.v[i * cols + j] *= dz;
    }
    const auto& nw = layers_[li + 1].w;  // m2 x m
    const size_t m2 = nw.shape[0];
    Tensor next = Tensor::zeros({m2, cols});
    for (size_t i = 0; i < m2; ++i)
      for (size_t k = 0; k < m; ++k) {
        const double x = nw.v[i * m + k];
        if (x == 0.0) continue;
        for (size_t j = 0; j < cols; ++j) next.v[i * cols + j] += x * jac.v[k * cols + j];
      }
    jac = std::move(next);
    for (double& x : z) x = activation_value(act_, x);
    a = std::move(z);
  }
  return jac;
}

std::vector<double> RealizedMlp::first_layer_preactivations(const std::vector<double>& s) const {
  check(s.size() == in_width(), "preactivations: expected input width ", in_width(), ", got ",
        s.size());
  const auto& l = layers_.front();
  const size_t m = l.w.shape[0], n = l.w.shape[1];
  std::vector<double> z(m);
  for (size_t i = 0; i < m; ++i) {
    double acc = l.b.v[i];
    for (size_t j = 0; j < n; ++j) acc += l.w.v[i * n + j] * s[j];
    z[i] = acc;
  }
  return z;
}

double RealizedMlp::min_weight() const {
  double lo = layers_.front().w.v.front();
  for (const auto& l : layers_)
    for (double x : l.w.v) lo = std::min(lo, x);
  return lo;
}

MonotoneMlp::MonotoneMlp(std::vector<size_t> widths, Activation act) : act_(act) {
  check(widths.size() >= 2, "MonotoneMlp: need at least {in, out} widths");
  for (size_t w : widths) check(w >= 1, "MonotoneMlp: zero width layer");
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.v = Tensor::zeros({widths[i + 1], widths[i]});
    l.b = Tensor::zeros({widths[i + 1]});
    layers_.push_back(std::move(l));
  }
}

MonotoneMlp MonotoneMlp::with_default_shape(size_t p, Activation act) {
  return MonotoneMlp({p, 4 * p, p}, act);
}

void MonotoneMlp::init_near_zero(Rng& rng) {
  for (auto& l : layers_) {
    for (double& x : l.v.v) x = -10.0 + rng.uniform(-0.1, 0.1);
    std::fill(l.b.v.begin(), l.b.v.end(), 0.0);
  }
}

void MonotoneMlp::init_random(Rng& rng, double mean, double stddev) {
  for (auto& l : layers_) {
    for (double& x : l.v.v) x = rng.normal(mean, stddev);
    std::fill(l.b.v.begin(), l.b.v.end(), 0.0);
  }
}

RealizedMlp MonotoneMlp::realize() const {
  std::vector<RealizedMlp::Layer> out;
  for (const auto& l : layers_) {
    RealizedMlp::Layer r;
    r.w = Tensor::zeros(l.v.shape);
    for (size_t i = 0; i < l.v.v.size(); ++i) r.w.v[i] = softplus(l.v.v[i]);
    r.b = l.b;
    r.b.requires_grad = false;
    r.b.grad.reset();
    r.w.requires_grad = false;
    out.push_back(std::move(r));
  }
  return RealizedMlp(std::move(out), act_);
}

std::vector<double> MonotoneMlp::forward(const std::vector<double>& s) const {
  return realize().forward(s);
}

Tensor MonotoneMlp::jacobian(const std::vector<double>& s) const { return realize().jacobian(s); }

SemanticMap::SemanticMap(const RealizedMlp* g) : g_(g) {
  check(g && g->in_width() == g->out_width(),
        "SemanticMap: g must map R^p -> R^p with matching widths");
}

std::vector<double> SemanticMap::forward(const std::vector<double>& s) const {
  std::vector<double> out = g_->forward(s);
  for (size_t i = 0; i < s.size(); ++i) out[i] += s[i];
  return out;
}

Tensor SemanticMap::jacobian(const std::vector<double>& s) const {
  Tensor j = g_->jacobian(s);
  const size_t p = j.shape[0];
  for (size_t i = 0; i < p; ++i) j.v[i * p + i] += 1.0;
  return j;
}

std::vector<bool> saturation_profile(const RealizedMlp& g, const std::vector<double>& s,
                                     double tau) {
  check(g.activation() != Activation::Relu,
        "saturation_profile: requires a saturating activation, got relu");
  const std::vector<double> z = g.first_layer_preactivations(s);
  std::vector<bool> flags(z.size());
  for (size_t i = 0; i < z.size(); ++i) flags[i] = z[i] >= tau;
  return flags;
}

std::vector<bool> saturation_profile(const RealizedMlp& g, const std::vector<double>& s) {
  return saturation_profile(g, s, default_saturation_threshold(g.activation()));
}

double frobenius_norm(const Tensor& m) {
  double acc = 0.0;
  for (double x : m.v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace mono
