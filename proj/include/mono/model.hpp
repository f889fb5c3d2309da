#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mono/monomlp.hpp"
#include "mono/semorder.hpp"
#include "mono/tape.hpp"

namespace mono {

enum class FfnMode { Monotone, Unconstrained };

const char* ffn_mode_name(FfnMode m);
FfnMode ffn_mode_from_name(const std::string& name);

struct ModelConfig {
  size_t vocab = 512;
  size_t d_model = 64;
  size_t p_sem = 16;
  size_t heads = 4;
  size_t enc_layers = 2;
  size_t dec_layers = 2;
  size_t g_hidden = 64;    // hidden width of the monotone map (4p convention)
  size_t ffn_hidden = 256;  // unconstrained feed-forward width (4d convention)
  size_t max_len = 64;
  FfnMode ffn_mode = FfnMode::Monotone;
  Activation g_act = Activation::Sigmoid;    // inside the monotone map
  Activation ffn_act = Activation::Relu;     // baseline feed-forward
  bool per_layer_order = false;              // one shared order by default

  void validate() const;
  size_t head_dim() const { return d_model / heads; }
};

// F(h) = h + Adag g(A h) with explicit (realized) weights in g. This is the
// unit the verification checks operate on; nothing constrains g's sign here,
// so negative controls are built from this type directly.
struct RealizedFfn {
  std::shared_ptr<const SemanticOrder> order;
  RealizedMlp g;

  std::vector<double> forward_row(const std::vector<double>& h) const;
};

// The constrained feed-forward sublayer: a shared semantic order plus a
// coordinatewise-monotone map acting in semantic coordinates.
struct MonotoneFfn {
  std::shared_ptr<const SemanticOrder> order;
  MonotoneMlp g;

  MonotoneFfn(std::shared_ptr<const SemanticOrder> ord, size_t hidden, Activation act);

  // F(h) = h + Adag g(A h), row by row. Width-d rows.
  std::vector<double> forward_row(const std::vector<double>& h) const;
  Tensor forward_rows(const Tensor& input) const;
  RealizedFfn realize() const;
};

// Named handle to a trainable tensor. Gradients accumulate in t->grad.
struct ParamRef {
  std::string name;
  Tensor* t;
};

// Handles into a tape-bound forward pass.
struct TapeBinding {
  Var logits;                          // T x vocab
  Var src_embed;                       // S x d, gathered source embeddings
  std::vector<std::pair<std::string, Var>> param_leaves;

  Var leaf(const std::string& name) const;
};

// Desk-scale pre-norm encoder-decoder transformer. Attention, norms and
// embeddings are always unconstrained; the feed-forward sublayer is either a
// plain two-layer map (with its own pre-norm) or a MonotoneFfn applied
// directly to the residual stream, in which case the sublayer equals
// F(h) = h + Adag g(A h) exactly.
class ModelGraph {
 public:
  // Unconstrained mode.
  explicit ModelGraph(ModelConfig cfg);
  // Monotone mode; the order is shared across layers (or cloned per layer
  // when cfg.per_layer_order is set and more orders are supplied).
  ModelGraph(ModelConfig cfg, std::vector<std::shared_ptr<const SemanticOrder>> orders);

  const ModelConfig& config() const { return cfg_; }

  // Deterministic init: every tensor draws from rng.split(param name), so two
  // models sharing a seed agree exactly on every identically-named tensor.
  void init_params(Rng& rng);

  std::vector<ParamRef> params();
  std::vector<ParamRef> params() const;  // const tensors, for inspection
  void zero_grads();

  size_t param_count() const;
  size_t attention_param_count() const;
  size_t ffn_param_count() const;

  // Build the full forward pass on a tape. `with_grad` marks parameter leaves
  // and the gathered source embeddings as gradient targets. An optional
  // S x d node already living on the tape is added to the gathered source
  // embeddings; gradients taken at a zero offset are exactly the loss
  // gradients w.r.t. the per-position input embeddings.
  TapeBinding bind_forward(Tape& tape, const std::vector<size_t>& src,
                           const std::vector<size_t>& tgt_in, bool with_grad,
                           std::optional<Var> src_embed_offset = {}) const;

  // Plain evaluation: logits for a target prefix (no gradients kept).
  Tensor forward_logits(const std::vector<size_t>& src,
                        const std::vector<size_t>& tgt_in) const;

  // Mean negative log-likelihood of `targets` under the model, pads skipped.
  double sequence_nll(const std::vector<size_t>& src, const std::vector<size_t>& targets) const;

  size_t ffn_sublayer_count() const { return cfg_.enc_layers + cfg_.dec_layers; }
  // Realized monotone sublayer by stack position (encoders first).
  RealizedFfn realized_ffn(size_t sublayer_index) const;
  const std::vector<std::shared_ptr<const SemanticOrder>>& orders() const { return orders_; }

  // Decoder input for a target sequence: BOS followed by all but nothing of y;
  // the matching loss targets are y followed by EOS.
  static std::vector<size_t> decoder_input(const std::vector<size_t>& y);
  static std::vector<size_t> decoder_targets(const std::vector<size_t>& y);

 private:
  struct Attn {
    std::vector<Tensor> wq, wk, wv;  // per head, d x head_dim
    Tensor wo;                       // d x d
  };
  struct PlainFfn {
    Tensor ln_g, ln_b;
    Tensor w1, b1;  // hidden x d, hidden
    Tensor w2, b2;  // d x hidden, d
  };
  struct Layer {
    Tensor ln1_g, ln1_b;
    Attn self_attn;
    Tensor ln2_g, ln2_b;  // decoder only: cross-attention norm
    std::optional<Attn> cross_attn;
    std::optional<PlainFfn> plain_ffn;
    std::optional<MonotoneFfn> mono_ffn;
  };

  void build_structure();
  void collect_params(std::vector<ParamRef>& out) const;
  const SemanticOrder& order_for_layer(size_t stack_index) const;

  Var attention(Tape& tape, const TapeBinding& b, const std::string& prefix, Var xq, Var xkv,
                const Tensor& mask) const;
  Var ffn_sublayer(Tape& tape, const TapeBinding& b, const std::string& prefix,
                   const Layer& layer, size_t stack_index, Var x) const;
  Var layernorm_affine(Tape& tape, const TapeBinding& b, Var x, const std::string& g_name,
                       const std::string& b_name) const;

  ModelConfig cfg_;
  std::vector<std::shared_ptr<const SemanticOrder>> orders_;
  Tensor emb_;  // vocab x d, tied to the output projection
  Tensor pos_;  // max_len x d, sinusoidal, not trainable
  std::vector<Layer> enc_, dec_;
  Tensor enc_ln_g_, enc_ln_b_, dec_ln_g_, dec_ln_b_;
};

// Mean token-level negative log-likelihood over non-pad target positions.
// Tape version for training plus a plain version usable as an independent check.
Var nll_loss_node(Tape& tape, Var logits, const std::vector<size_t>& targets);
double nll_loss_value(const Tensor& logits, const std::vector<size_t>& targets);

}  // namespace mono
