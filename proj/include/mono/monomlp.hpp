#pragma once

#include <string>
#include <vector>

#include "mono/rng.hpp"
#include "mono/tensor.hpp"

namespace mono {

enum class Activation { Sigmoid, Tanh, Relu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);
double activation_value(Activation a, double z);
double activation_grad(Activation a, double z);

// Pre-activation threshold beyond which the activation derivative drops
// below 1e-6. Only saturating activations qualify; relu has no such regime.
double default_saturation_threshold(Activation a);

// A plain MLP with explicit (already realized) weight matrices. Layer i maps
// width[i] -> width[i+1]; the activation is applied after every layer except
// the last. Nothing here enforces a sign on the weights, which is exactly why
// verification negative controls are built from this type.
class RealizedMlp {
 public:
  struct Layer {
    Tensor w;  // out x in
    Tensor b;  // out
  };

  RealizedMlp() = default;
  RealizedMlp(std::vector<Layer> layers, Activation act);

  size_t in_width() const { return layers_.front().w.shape[1]; }
  size_t out_width() const { return layers_.back().w.shape[0]; }
  size_t depth() const { return layers_.size(); }
  Activation activation() const { return act_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::vector<double> forward(const std::vector<double>& s) const;
  // d out / d s, evaluated analytically from the layer factorization.
  Tensor jacobian(const std::vector<double>& s) const;

  // First-layer pre-activations W1 s + b1.
  std::vector<double> first_layer_preactivations(const std::vector<double>& s) const;

  double min_weight() const;

 private:
  std::vector<Layer> layers_;
  Activation act_ = Activation::Sigmoid;
};

// Coordinatewise-monotone MLP. Weights are stored as unconstrained matrices V
// and realized as W = softplus(V) elementwise, so W >= 0 holds for every
// parameter value any optimizer can reach; no projection step exists anywhere.
class MonotoneMlp {
 public:
  struct Layer {
    Tensor v;  // out x in, unconstrained
    Tensor b;  // out
  };

  // widths = {in, hidden..., out}.
  MonotoneMlp(std::vector<size_t> widths, Activation act = Activation::Sigmoid);

  // One hidden layer of width 4p, the default shape.
  static MonotoneMlp with_default_shape(size_t p, Activation act = Activation::Sigmoid);

  // V = -10 + U(-0.1, 0.1), biases zero: realized weights are ~4.5e-5, so the
  // map starts indistinguishable from zero while still passing usable
  // gradients to V.
  void init_near_zero(Rng& rng);
  // Gaussian V (realized weights O(1)); used by fixtures and studies.
  void init_random(Rng& rng, double mean = 0.0, double stddev = 1.0);

  size_t in_width() const { return layers_.front().v.shape[1]; }
  size_t out_width() const { return layers_.back().v.shape[0]; }
  size_t depth() const { return layers_.size(); }
  Activation activation() const { return act_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  RealizedMlp realize() const;

  std::vector<double> forward(const std::vector<double>& s) const;
  Tensor jacobian(const std::vector<double>& s) const;

 private:
  std::vector<Layer> layers_;
  Activation act_ = Activation::Sigmoid;
};

// The induced semantic refinement map T(s) = s + g(s) of a coordinatewise
// map g, with J_T(s) = I + J_g(s).
class SemanticMap {
 public:
  explicit SemanticMap(const RealizedMlp* g);
  std::vector<double> forward(const std::vector<double>& s) const;
  Tensor jacobian(const std::vector<double>& s) const;
  const RealizedMlp& g() const { return *g_; }

 private:
  const RealizedMlp* g_;
};

// Flags first-layer unit j iff (W1 s + b1)_j >= tau. Requires a saturating
// activation (sigmoid or tanh); relu is rejected because its derivative never
// vanishes as the pre-activation grows.
std::vector<bool> saturation_profile(const RealizedMlp& g, const std::vector<double>& s,
                                     double tau);
std::vector<bool> saturation_profile(const RealizedMlp& g, const std::vector<double>& s);

double frobenius_norm(const Tensor& m);

}  // namespace mono
