#include "mono/model.hpp"

#include <cmath>

#include "mono/linalg.hpp"
#include "mono/tokenizer.hpp"

namespace mono {

namespace {
constexpr double kMaskValue = -1e9;
}

const char* ffn_mode_name(FfnMode m) {
  return m == FfnMode::Monotone ? "monotone" : "unconstrained";
}

FfnMode ffn_mode_from_name(const std::string& name) {
  if (name == "monotone") return FfnMode::Monotone;
  if (name == "unconstrained") return FfnMode::Unconstrained;
  fail("unknown ffn mode '", name, "' (expected monotone or unconstrained)");
}

void ModelConfig::validate() const {
  check(vocab > kUnkId, "config: vocab must exceed the reserved token ids");
  check(d_model >= 1 && p_sem >= 1 && heads >= 1 && enc_layers >= 1 && dec_layers >= 1 &&
            g_hidden >= 1 && ffn_hidden >= 1 && max_len >= 2,
        "config: all model extents must be at least 1 (max_len at least 2)");
  check(d_model % heads == 0, "config: d_model ", d_model, " not divisible by heads ", heads);
  check(p_sem <= d_model, "config: p ", p_sem, " exceeds model width ", d_model);
}

std::vector<double> RealizedFfn::forward_row(const std::vector<double>& h) const {
  check(h.size() == order->d(), "ffn: expected row width ", order->d(), ", got ", h.size());
  std::vector<double> gs = g.forward(order->project(h));
  std::vector<double> lifted = order->lift(gs);
  std::vector<double> out = h;
  for (size_t i = 0; i < out.size(); ++i) out[i] += lifted[i];
  return out;
}

MonotoneFfn::MonotoneFfn(std::shared_ptr<const SemanticOrder> ord, size_t hidden, Activation act)
    : order(std::move(ord)), g({order->p(), hidden, order->p()}, act) {}

std::vector<double> MonotoneFfn::forward_row(const std::vector<double>& h) const {
  RealizedFfn r{order, g.realize()};
  return r.forward_row(h);
}

Tensor MonotoneFfn::forward_rows(const Tensor& input) const {
  check(input.ndim() == 2 && input.shape[1] == order->d(), "ffn: expected n x ", order->d(),
        ", got ", input.shape_str());
  RealizedFfn r{order, g.realize()};
  Tensor out = input;
  for (size_t i = 0; i < input.shape[0]; ++i) {
    std::vector<double> row(input.v.begin() + i * input.shape[1],
                            input.v.begin() + (i + 1) * input.shape[1]);
    std::vector<double> fo = r.forward_row(row);
    std::copy(fo.begin(), fo.end(), out.v.begin() + i * input.shape[1]);
  }
  return out;
}

RealizedFfn MonotoneFfn::realize() const { return RealizedFfn{order, g.realize()}; }

Var TapeBinding::leaf(const std::string& name) const {
  for (const auto& [n, v] : param_leaves)
    if (n == name) return v;
  fail("tape binding: no parameter leaf named '", name, "'");
}

ModelGraph::ModelGraph(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  check(cfg_.ffn_mode == FfnMode::Unconstrained,
        "ModelGraph: monotone mode requires a semantic order");
  build_structure();
}

ModelGraph::ModelGraph(ModelConfig cfg, std::vector<std::shared_ptr<const SemanticOrder>> orders)
    : cfg_(cfg), orders_(std::move(orders)) {
  cfg_.validate();
  check(cfg_.ffn_mode == FfnMode::Monotone, "ModelGraph: orders supplied for unconstrained mode");
  const size_t expected = cfg_.per_layer_order ? cfg_.enc_layers + cfg_.dec_layers : 1;
  check(orders_.size() == expected, "ModelGraph: expected ", expected, " semantic orders, got ",
        orders_.size());
  for (const auto& o : orders_) {
    check(o != nullptr, "ModelGraph: null semantic order");
    check(o->p() == cfg_.p_sem && o->d() == cfg_.d_model, "ModelGraph: order is ", o->p(), "x",
          o->d(), ", config wants ", cfg_.p_sem, "x", cfg_.d_model);
  }
  build_structure();
}

const SemanticOrder& ModelGraph::order_for_layer(size_t stack_index) const {
  return cfg_.per_layer_order ? *orders_[stack_index] : *orders_[0];
}

void ModelGraph::build_structure() {
  const size_t d = cfg_.d_model, dh = cfg_.head_dim();
  emb_ = Tensor::zeros({cfg_.vocab, d});

  pos_ = Tensor::zeros({cfg_.max_len, d});
  for (size_t t = 0; t < cfg_.max_len; ++t)
    for (size_t i = 0; i < d; ++i) {
      const double angle = double(t) / std::pow(10000.0, double(2 * (i / 2)) / double(d));
      pos_.at(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }

  auto make_attn = [&]() {
    Attn a;
    for (size_t h = 0; h < cfg_.heads; ++h) {
      a.wq.push_back(Tensor::zeros({d, dh}));
      a.wk.push_back(Tensor::zeros({d, dh}));
      a.wv.push_back(Tensor::zeros({d, dh}));
    }
    a.wo = Tensor::zeros({d, d});
    return a;
  };
  auto make_layer = [&](bool decoder, size_t stack_index) {
    Layer l;
    l.ln1_g = Tensor::zeros({d});
    l.ln1_b = Tensor::zeros({d});
    l.self_attn = make_attn();
    if (decoder) {
      l.ln2_g = Tensor::zeros({d});
      l.ln2_b = Tensor::zeros({d});
      l.cross_attn = make_attn();
    }
    if (cfg_.ffn_mode == FfnMode::Unconstrained) {
      PlainFfn f;
      f.ln_g = Tensor::zeros({d});
      f.ln_b = Tensor::zeros({d});
      f.w1 = Tensor::zeros({cfg_.ffn_hidden, d});
      f.b1 = Tensor::zeros({cfg_.ffn_hidden});
      f.w2 = Tensor::zeros({d, cfg_.ffn_hidden});
      f.b2 = Tensor::zeros({d});
      l.plain_ffn = std::move(f);
    } else {
      std::shared_ptr<const SemanticOrder> ord =
          cfg_.per_layer_order ? orders_[stack_index] : orders_[0];
      l.mono_ffn.emplace(std::move(ord), cfg_.g_hidden, cfg_.g_act);
    }
    return l;
  };

  for (size_t i = 0; i < cfg_.enc_layers; ++i) enc_.push_back(make_layer(false, i));
  for (size_t i = 0; i < cfg_.dec_layers; ++i)
    dec_.push_back(make_layer(true, cfg_.enc_layers + i));
  enc_ln_g_ = Tensor::zeros({d});
  enc_ln_b_ = Tensor::zeros({d});
  dec_ln_g_ = Tensor::zeros({d});
  dec_ln_b_ = Tensor::zeros({d});
}

void ModelGraph::collect_params(std::vector<ParamRef>& out) const {
  auto* self = const_cast<ModelGraph*>(this);
  auto add = [&](const std::string& name, Tensor& t) { out.push_back({name, &t}); };
  add("emb", self->emb_);
  auto add_attn = [&](const std::string& prefix, Attn& a) {
    for (size_t h = 0; h < a.wq.size(); ++h) {
      add(prefix + ".q" + std::to_string(h), a.wq[h]);
      add(prefix + ".k" + std::to_string(h), a.wk[h]);
      add(prefix + ".v" + std::to_string(h), a.wv[h]);
    }
    add(prefix + ".o", a.wo);
  };
  auto add_layer = [&](const std::string& prefix, Layer& l) {
    add(prefix + ".ln1.g", l.ln1_g);
    add(prefix + ".ln1.b", l.ln1_b);
    add_attn(prefix + ".self", l.self_attn);
    if (l.cross_attn) {
      add(prefix + ".ln2.g", l.ln2_g);
      add(prefix + ".ln2.b", l.ln2_b);
      add_attn(prefix + ".cross", *l.cross_attn);
    }
    if (l.plain_ffn) {
      add(prefix + ".ffn.ln.g", l.plain_ffn->ln_g);
      add(prefix + ".ffn.ln.b", l.plain_ffn->ln_b);
      add(prefix + ".ffn.w1", l.plain_ffn->w1);
      add(prefix + ".ffn.b1", l.plain_ffn->b1);
      add(prefix + ".ffn.w2", l.plain_ffn->w2);
      add(prefix + ".ffn.b2", l.plain_ffn->b2);
    }
    if (l.mono_ffn) {
      auto& layers = l.mono_ffn->g.layers();
      for (size_t j = 0; j < layers.size(); ++j) {
        add(prefix + ".ffn.g.l" + std::to_string(j) + ".v", layers[j].v);
        add(prefix + ".ffn.g.l" + std::to_string(j) + ".b", layers[j].b);
      }
    }
  };
  for (size_t i = 0; i < enc_.size(); ++i)
    add_layer("enc" + std::to_string(i), self->enc_[i]);
  for (size_t i = 0; i < dec_.size(); ++i)
    add_layer("dec" + std::to_string(i), self->dec_[i]);
  add("enc_ln.g", self->enc_ln_g_);
  add("enc_ln.b", self->enc_ln_b_);
  add("dec_ln.g", self->dec_ln_g_);
  add("dec_ln.b", self->dec_ln_b_);
}

std::vector<ParamRef> ModelGraph::params() {
  std::vector<ParamRef> out;
  collect_params(out);
  return out;
}

std::vector<ParamRef> ModelGraph::params() const {
  std::vector<ParamRef> out;
  collect_params(out);
  return out;
}

void ModelGraph::zero_grads() {
  for (auto& p : params()) p.t->zero_grad();
}

void ModelGraph::init_params(Rng& rng) {
  for (auto& p : params()) {
    Rng r = rng.split(p.name);
    Tensor& t = *p.t;
    const std::string& n = p.name;
    const bool is_ln_gain = n.size() >= 2 && n.substr(n.size() - 2) == ".g" &&
                            n.find(".ln") != std::string::npos;
    const bool is_ln_bias = n.size() >= 2 && n.substr(n.size() - 2) == ".b" &&
                            n.find(".ln") != std::string::npos;
    if (n == "emb") {
      const double std = 1.0 / std::sqrt(double(cfg_.d_model));
      for (double& x : t.v) x = r.normal(0.0, std);
    } else if (is_ln_gain || n == "enc_ln.g" || n == "dec_ln.g") {
      std::fill(t.v.begin(), t.v.end(), 1.0);
    } else if (is_ln_bias || n == "enc_ln.b" || n == "dec_ln.b") {
      std::fill(t.v.begin(), t.v.end(), 0.0);
    } else if (n.find(".ffn.g.l") != std::string::npos) {
      // near-zero monotone init: V = -10 +/- 0.1, biases zero
      if (n.back() == 'v')
        for (double& x : t.v) x = -10.0 + r.uniform(-0.1, 0.1);
      else
        std::fill(t.v.begin(), t.v.end(), 0.0);
    } else if (n.find(".b1") != std::string::npos || n.find(".b2") != std::string::npos) {
      std::fill(t.v.begin(), t.v.end(), 0.0);
    } else if (t.ndim() == 2) {
      const double std = std::sqrt(2.0 / double(t.shape[0] + t.shape[1]));
      for (double& x : t.v) x = r.normal(0.0, std);
    } else {
      std::fill(t.v.begin(), t.v.end(), 0.0);
    }
  }
}

size_t ModelGraph::param_count() const {
  size_t n = 0;
  for (const auto& p : params()) n += p.t->numel();
  return n;
}

size_t ModelGraph::attention_param_count() const {
  size_t n = 0;
  for (const auto& p : params())
    if (p.name.find(".self.") != std::string::npos || p.name.find(".cross.") != std::string::npos)
      n += p.t->numel();
  return n;
}

size_t ModelGraph::ffn_param_count() const {
  size_t n = 0;
  for (const auto& p : params())
    if (p.name.find(".ffn.") != std::string::npos) n += p.t->numel();
  return n;
}

Var ModelGraph::layernorm_affine(Tape& tape, const TapeBinding& b, Var x,
                                 const std::string& g_name, const std::string& b_name) const {
  Var normed = tape.layernorm_lastdim(x);
  return tape.add(tape.mul(normed, b.leaf(g_name)), b.leaf(b_name));
}

Var ModelGraph::attention(Tape& tape, const TapeBinding& b, const std::string& prefix, Var xq,
                          Var xkv, const Tensor& mask) const {
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(cfg_.head_dim()));
  Var mask_node = tape.constant(mask);
  Var cat;
  for (size_t h = 0; h < cfg_.heads; ++h) {
    const std::string hs = std::to_string(h);
    Var q = tape.matmul(xq, b.leaf(prefix + ".q" + hs));
    Var k = tape.matmul(xkv, b.leaf(prefix + ".k" + hs));
    Var v = tape.matmul(xkv, b.leaf(prefix + ".v" + hs));
    Var scores = tape.add(tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dh), mask_node);
    Var ctx = tape.matmul(tape.softmax_lastdim(scores), v);
    cat = h == 0 ? ctx : tape.concat(cat, ctx);
  }
  return tape.matmul(cat, b.leaf(prefix + ".o"));
}

Var ModelGraph::ffn_sublayer(Tape& tape, const TapeBinding& b, const std::string& prefix,
                             const Layer& layer, size_t stack_index, Var x) const {
  if (layer.plain_ffn) {
    Var f_in = layernorm_affine(tape, b, x, prefix + ".ffn.ln.g", prefix + ".ffn.ln.b");
    Var z1 = tape.add(tape.matmul(f_in, tape.transpose(b.leaf(prefix + ".ffn.w1"))),
                      b.leaf(prefix + ".ffn.b1"));
    Var a1;
    switch (cfg_.ffn_act) {
      case Activation::Relu: a1 = tape.relu(z1); break;
      case Activation::Sigmoid: a1 = tape.sigmoid(z1); break;
      case Activation::Tanh: a1 = tape.tanh(z1); break;
    }
    Var out = tape.add(tape.matmul(a1, tape.transpose(b.leaf(prefix + ".ffn.w2"))),
                       b.leaf(prefix + ".ffn.b2"));
    return tape.add(x, out);
  }

  // Monotone sublayer acts on the residual stream directly:
  // x + Adag g(A x), no norm, so the sublayer is exactly F.
  const SemanticOrder& so = order_for_layer(stack_index);
  Var s = tape.matmul(x, tape.constant(mat_transpose(so.a())));  // n x p
  Var cur = s;
  const auto& glayers = layer.mono_ffn->g.layers();
  for (size_t j = 0; j < glayers.size(); ++j) {
    const std::string ls = prefix + ".ffn.g.l" + std::to_string(j);
    Var w_t = tape.transpose(tape.softplus(b.leaf(ls + ".v")));
    cur = tape.add(tape.matmul(cur, w_t), b.leaf(ls + ".b"));
    if (j + 1 < glayers.size()) {
      switch (cfg_.g_act) {
        case Activation::Sigmoid: cur = tape.sigmoid(cur); break;
        case Activation::Tanh: cur = tape.tanh(cur); break;
        case Activation::Relu: cur = tape.relu(cur); break;
      }
    }
  }
  Var lifted = tape.matmul(cur, tape.constant(mat_transpose(so.adag())));  // n x d
  return tape.add(x, lifted);
}

TapeBinding ModelGraph::bind_forward(Tape& tape, const std::vector<size_t>& src,
                                     const std::vector<size_t>& tgt_in, bool with_grad,
                                     std::optional<Var> src_embed_offset) const {
  check(!src.empty() && !tgt_in.empty(), "model forward: empty source or target prefix");
  check(src.size() <= cfg_.max_len && tgt_in.size() <= cfg_.max_len,
        "model forward: sequence exceeds max length ", cfg_.max_len);
  for (size_t id : src)
    check(id < cfg_.vocab, "model forward: source token id ", id, " out of vocabulary range ",
          cfg_.vocab);
  for (size_t id : tgt_in)
    check(id < cfg_.vocab, "model forward: target token id ", id, " out of vocabulary range ",
          cfg_.vocab);

  TapeBinding b;
  for (const auto& p : params()) {
    Tensor t = *p.t;
    t.requires_grad = with_grad;
    t.grad.reset();
    b.param_leaves.emplace_back(p.name, tape.leaf(std::move(t)));
  }

  const size_t s_len = src.size(), t_len = tgt_in.size();
  const double emb_scale = std::sqrt(double(cfg_.d_model));

  // Additive masks: source pads are invisible to every query.
  Tensor enc_mask = Tensor::zeros({s_len, s_len});
  Tensor cross_mask = Tensor::zeros({t_len, s_len});
  for (size_t j = 0; j < s_len; ++j)
    if (src[j] == kPadId) {
      for (size_t i = 0; i < s_len; ++i) enc_mask.at(i, j) = kMaskValue;
      for (size_t i = 0; i < t_len; ++i) cross_mask.at(i, j) = kMaskValue;
    }
  Tensor causal_mask = Tensor::zeros({t_len, t_len});
  for (size_t i = 0; i < t_len; ++i)
    for (size_t j = 0; j < t_len; ++j)
      if (j > i || tgt_in[j] == kPadId) causal_mask.at(i, j) = kMaskValue;

  auto positional = [&](size_t n) {
    Tensor p = Tensor::zeros({n, cfg_.d_model});
    for (size_t t = 0; t < n; ++t)
      for (size_t i = 0; i < cfg_.d_model; ++i) p.at(t, i) = pos_.at(t, i);
    return p;
  };

  // Encoder.
  Var emb_leaf = b.leaf("emb");
  b.src_embed = tape.gather_rows(emb_leaf, src);
  if (src_embed_offset) {
    const Tensor& off = tape.value(*src_embed_offset);
    check(off.shape == tape.value(b.src_embed).shape,
          "model forward: source embedding offset has shape ", off.shape_str());
    b.src_embed = tape.add(b.src_embed, *src_embed_offset);
  }
  Var x = tape.add(tape.scale(b.src_embed, emb_scale), tape.constant(positional(s_len)));
  for (size_t i = 0; i < enc_.size(); ++i) {
    const std::string prefix = "enc" + std::to_string(i);
    Var a_in = layernorm_affine(tape, b, x, prefix + ".ln1.g", prefix + ".ln1.b");
    x = tape.add(x, attention(tape, b, prefix + ".self", a_in, a_in, enc_mask));
    x = ffn_sublayer(tape, b, prefix, enc_[i], i, x);
  }
  Var enc_out = layernorm_affine(tape, b, x, "enc_ln.g", "enc_ln.b");

  // Decoder.
  Var y = tape.add(tape.scale(tape.gather_rows(emb_leaf, tgt_in), emb_scale),
                   tape.constant(positional(t_len)));
  for (size_t i = 0; i < dec_.size(); ++i) {
    const std::string prefix = "dec" + std::to_string(i);
    Var a_in = layernorm_affine(tape, b, y, prefix + ".ln1.g", prefix + ".ln1.b");
    y = tape.add(y, attention(tape, b, prefix + ".self", a_in, a_in, causal_mask));
    Var c_in = layernorm_affine(tape, b, y, prefix + ".ln2.g", prefix + ".ln2.b");
    y = tape.add(y, attention(tape, b, prefix + ".cross", c_in, enc_out, cross_mask));
    y = ffn_sublayer(tape, b, prefix, dec_[i], cfg_.enc_layers + i, y);
  }
  Var dec_out = layernorm_affine(tape, b, y, "dec_ln.g", "dec_ln.b");

  b.logits = tape.matmul(dec_out, tape.transpose(emb_leaf));
  return b;
}

Tensor ModelGraph::forward_logits(const std::vector<size_t>& src,
                                  const std::vector<size_t>& tgt_in) const {
  Tape tape;
  TapeBinding b = bind_forward(tape, src, tgt_in, false);
  return tape.value(b.logits);
}

double ModelGraph::sequence_nll(const std::vector<size_t>& src,
                                const std::vector<size_t>& targets) const {
  return nll_loss_value(forward_logits(src, decoder_input(targets)), decoder_targets(targets));
}

RealizedFfn ModelGraph::realized_ffn(size_t idx) const {
  check(cfg_.ffn_mode == FfnMode::Monotone, "realized_ffn: model is unconstrained");
  check(idx < ffn_sublayer_count(), "realized_ffn: sublayer ", idx, " out of range");
  const Layer& l = idx < cfg_.enc_layers ? enc_[idx] : dec_[idx - cfg_.enc_layers];
  return l.mono_ffn->realize();
}

std::vector<size_t> ModelGraph::decoder_input(const std::vector<size_t>& y) {
  std::vector<size_t> in;
  in.push_back(kBosId);
  in.insert(in.end(), y.begin(), y.end());
  return in;
}

std::vector<size_t> ModelGraph::decoder_targets(const std::vector<size_t>& y) {
  std::vector<size_t> out = y;
  out.push_back(kEosId);
  return out;
}

Var nll_loss_node(Tape& tape, Var logits, const std::vector<size_t>& targets) {
  const Tensor& lt = tape.value(logits);
  check(lt.ndim() == 2, "nll_loss: logits must be 2-d, got ", lt.shape_str());
  check(lt.shape[0] == targets.size(), "nll_loss: ", targets.size(), " targets for ",
        lt.shape[0], " logit rows");
  size_t live = 0;
  Tensor pick = Tensor::zeros(lt.shape);
  for (size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] == kPadId) continue;
    check(targets[t] < lt.shape[1], "nll_loss: target id ", targets[t], " out of range");
    pick.at(t, targets[t]) = 1.0;
    ++live;
  }
  check(live > 0, "nll_loss: all target positions are padding");
  Var logp = tape.log(tape.softmax_lastdim(logits));
  return tape.scale(tape.sum(tape.mul(logp, tape.constant(pick))), -1.0 / double(live));
}

double nll_loss_value(const Tensor& logits, const std::vector<size_t>& targets) {
  Tape tape;
  Var node = nll_loss_node(tape, tape.constant(logits), targets);
  return tape.value(node).scalar_value();
}

}  // namespace mono
