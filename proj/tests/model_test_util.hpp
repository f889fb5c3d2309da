#pragma once

#include <string>
#include <vector>

#include "mono/gradcheck.hpp"
#include "mono/model.hpp"

namespace mono::testutil {

inline ModelConfig tiny_config(FfnMode mode, size_t vocab = 16, size_t d = 8, size_t p = 4,
                               size_t heads = 2, size_t layers = 1, size_t hidden = 12,
                               size_t max_len = 16) {
  ModelConfig cfg;
  cfg.vocab = vocab;
  cfg.d_model = d;
  cfg.p_sem = p;
  cfg.heads = heads;
  cfg.enc_layers = layers;
  cfg.dec_layers = layers;
  cfg.g_hidden = hidden;
  cfg.ffn_hidden = hidden;
  cfg.max_len = max_len;
  cfg.ffn_mode = mode;
  return cfg;
}

inline ModelGraph make_model(const ModelConfig& cfg, uint64_t seed,
                             bool smooth_baseline_ffn = false) {
  ModelConfig c = cfg;
  if (smooth_baseline_ffn) c.ffn_act = Activation::Sigmoid;
  Rng rng(seed);
  if (c.ffn_mode == FfnMode::Monotone) {
    Rng order_rng = rng.split("order");
    auto order = std::make_shared<const SemanticOrder>(
        SemanticOrder::from_matrix(random_orthonormal_rows(c.p_sem, c.d_model, order_rng)));
    ModelGraph m(c, {order});
    Rng init = rng.split("init");
    m.init_params(init);
    return m;
  }
  ModelGraph m(c);
  Rng init = rng.split("init");
  m.init_params(init);
  return m;
}

// Scatters roughly trained-scale values into every parameter so that
// gradient checks do not sit at the near-zero monotone init (where V
// gradients are vanishingly small relative to finite-difference noise).
inline void randomize_params_trained_scale(ModelGraph& m, uint64_t seed) {
  Rng rng(seed);
  for (auto& p : m.params()) {
    Rng r = rng.split(p.name);
    const bool is_v = p.name.find(".ffn.g.l") != std::string::npos && p.name.back() == 'v';
    for (double& x : p.t->v) x = is_v ? r.normal(-1.0, 0.8) : r.normal(0.0, 0.3);
  }
}

// Central differences have a per-coordinate sweet spot: large steps pick up
// curvature, small steps pick up rounding noise (gradients near 1e-8 sit at
// the relative-error denominator floor). Probing two steps and keeping the
// better match per coordinate keeps the oracle sharp: an actually wrong
// reverse-mode gradient disagrees at every step.
constexpr double kFdStepA = 1e-3;
constexpr double kFdStepB = 3e-5;

inline double best_of_two_steps_err(const Tensor& analytic, const Tensor& na, const Tensor& nb) {
  double worst = 0.0;
  for (size_t i = 0; i < analytic.v.size(); ++i)
    worst = std::max(worst, std::min(rel_err(analytic.v[i], na.v[i]),
                                     rel_err(analytic.v[i], nb.v[i])));
  return worst;
}

// Max relative error between reverse-mode and central-difference gradients of
// the sequence loss w.r.t. the named parameter tensor.
inline double param_grad_max_rel_err(const ModelGraph& model, const std::string& name,
                                     const std::vector<size_t>& src,
                                     const std::vector<size_t>& y) {
  const std::vector<size_t> tgt_in = ModelGraph::decoder_input(y);
  const std::vector<size_t> tgt_out = ModelGraph::decoder_targets(y);

  Tensor analytic;
  {
    Tape tape;
    TapeBinding b = model.bind_forward(tape, src, tgt_in, true);
    tape.backward(nll_loss_node(tape, b.logits, tgt_out));
    analytic = tape.grad(b.leaf(name));
  }

  ModelGraph probe = model;  // parameters get overwritten per evaluation
  Tensor* slot = nullptr;
  for (auto& p : probe.params())
    if (p.name == name) slot = p.t;
  check(slot != nullptr, "param_grad_max_rel_err: no parameter '", name, "'");

  auto f = [&](const Tensor& x) {
    slot->v = x.v;
    return probe.sequence_nll(src, y);
  };
  Tensor start = *slot;
  Tensor na = finite_diff_gradient(f, start, kFdStepA);
  Tensor nb = finite_diff_gradient(f, start, kFdStepB);
  slot->v = start.v;
  return best_of_two_steps_err(analytic, na, nb);
}

// Same, for the gradient w.r.t. the per-position source embeddings.
inline double embed_grad_max_rel_err(const ModelGraph& model, const std::vector<size_t>& src,
                                     const std::vector<size_t>& y) {
  const std::vector<size_t> tgt_in = ModelGraph::decoder_input(y);
  const std::vector<size_t> tgt_out = ModelGraph::decoder_targets(y);
  auto f = [&](Tape& tape, Var x) {
    TapeBinding b = model.bind_forward(tape, src, tgt_in, false, x);
    return nll_loss_node(tape, b.logits, tgt_out);
  };
  Tensor zero_offset = Tensor::zeros({src.size(), model.config().d_model});
  FdCheck ra = finite_diff_check(f, zero_offset, kFdStepA);
  FdCheck rb = finite_diff_check(f, zero_offset, kFdStepB);
  return best_of_two_steps_err(ra.analytic, ra.numeric, rb.numeric);
}

}  // namespace mono::testutil
