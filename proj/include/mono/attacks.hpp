#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mono/decode.hpp"
#include "mono/metrics.hpp"
#include "mono/model.hpp"
#include "mono/tokenizer.hpp"
#include "mono/train.hpp"

namespace mono {

struct HotFlipConfig {
  size_t max_replacements = 5;
  std::vector<bool> candidate_mask;          // empty = every non-reserved token
  std::vector<size_t> protected_positions;   // pads and the source EOS are always protected
  bool greedy = false;  // recompute gradients after each substitution instead of one joint pass
};

struct AttackOutcome {
  size_t example_id = 0;
  double clean_loss = 0.0;
  double attacked_loss = 0.0;
  double clean_rouge_l = -1.0;     // < 0 when generation scoring was off
  double attacked_rouge_l = -1.0;
  std::vector<std::pair<size_t, size_t>> replacements;  // (position, new token id)
  std::vector<size_t> trigger;                          // trigger attacks only

  double loss_degradation() const {
    return clean_loss != 0.0 ? (attacked_loss - clean_loss) / clean_loss : 0.0;
  }
  double rouge_degradation() const {
    return clean_rouge_l > 0.0 ? (clean_rouge_l - attacked_rouge_l) / clean_rouge_l : 0.0;
  }
};

// Optional generation scoring for attack outcomes.
struct GenerationEval {
  const Tokenizer* tok = nullptr;
  std::string reference_text;
  DecodeConfig decode;
};

std::vector<bool> default_candidate_mask(size_t vocab);

// Punctuation/special tokens plus the most frequent fraction of training
// tokens, the usual bias for trigger searches.
std::vector<bool> biased_candidate_vocabulary(const Tokenizer& tok,
                                              const std::vector<EncodedExample>& train,
                                              double top_fraction = 0.05);

// Loss gradients w.r.t. the per-position source embeddings (S x d).
Tensor source_embedding_gradients(const ModelGraph& model, const std::vector<size_t>& src,
                                  const std::vector<size_t>& targets);

// Gradient-guided token substitution: rank source positions by gradient norm,
// pick the highest-scoring replacement per position by the first-order loss
// estimate (e_new - e_old) . grad, apply, and re-evaluate.
AttackOutcome hotflip(const ModelGraph& model, const EncodedExample& example,
                      const HotFlipConfig& cfg, const GenerationEval* gen = nullptr);

struct TriggerConfig {
  size_t length = 3;
  size_t restarts = 3;
  size_t iterations = 50;
  size_t shortlist = 20;          // gradient-ranked candidates per coordinate step
  size_t exact_sweep_vocab = 64;  // at most this many candidates: skip the shortlist, sweep all
  std::vector<bool> candidate_mask;  // empty = every non-reserved token
  uint64_t seed = 42;
};

struct TriggerResult {
  std::vector<size_t> tokens;
  double train_loss = 0.0;                   // mean loss with the trigger prepended
  double clean_loss = 0.0;                   // mean loss without it
  std::vector<double> best_loss_by_sweep;    // non-decreasing within a restart
};

// Mean loss over examples with the trigger prepended to every source.
double triggered_batch_loss(const ModelGraph& model, const std::vector<EncodedExample>& examples,
                            const std::vector<size_t>& trigger);

// Coordinate ascent over trigger positions, exact candidate evaluation at
// each step, best trigger across random restarts.
TriggerResult uat_search(const ModelGraph& model, const std::vector<EncodedExample>& train,
                         const TriggerConfig& cfg);

// Percent NLL increase of model i under the trigger optimized against model j.
Tensor transfer_matrix(const std::vector<const ModelGraph*>& models,
                       const std::vector<std::vector<size_t>>& triggers,
                       const std::vector<EncodedExample>& test_examples);

void write_transfer_csv(const Tensor& matrix, const std::string& path);

}  // namespace mono
