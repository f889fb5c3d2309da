#pragma once

#include <string>
#include <vector>

#include "mono/dataset.hpp"
#include "mono/model.hpp"
#include "mono/optim.hpp"
#include "mono/tokenizer.hpp"

namespace mono {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  size_t batch_size = 4;
  size_t epochs = 5;
  double warmup_fraction = 0.10;  // 0.15 is the usual pick for monotone runs
  double clip_norm = 1.0;
  uint64_t seed = 42;
  double lambda = 1.0;       // gold-label weight; < 1 mixes in a teacher
  double temperature = 2.0;  // distillation softening
  double val_fraction = 0.2;

  void validate() const;
};

struct RunLog {
  double initial_loss = 0.0;       // mean train-split loss before any update
  std::vector<double> train_loss;  // per epoch, mean over steps
  std::vector<double> val_loss;    // per epoch
  std::vector<double> lr_by_step;
  double wall_seconds = 0.0;
  size_t best_epoch = 0;
  double best_val = 0.0;
  double adam_beta1 = 0.0, adam_beta2 = 0.0, adam_eps = 0.0;  // recorded for audit
};

// Tokenized example pair, clipped to the model's sequence budget.
struct EncodedExample {
  std::vector<size_t> src;  // tokens + EOS
  std::vector<size_t> tgt;  // tokens (loss appends EOS)
};

EncodedExample encode_example(const Example& ex, const Tokenizer& tok, size_t max_len);
std::vector<EncodedExample> encode_dataset(const Dataset& data, const Tokenizer& tok,
                                           size_t max_len);

// lambda * CE(student, gold) + (1 - lambda) * KL(teacher_T || student_T) with
// both distributions softened by the temperature; reduces to the plain loss
// node at lambda = 1.
Var distill_loss_node(Tape& tape, Var student_logits, const Tensor& teacher_logits,
                      const std::vector<size_t>& targets, double lambda, double temperature);

// Optimizes the model in place (AdamW, linear warmup/decay, global-norm
// clipping); restores the best-validation parameters before returning.
// A teacher turns the objective into the distillation mix.
RunLog train_model(ModelGraph& model, const Dataset& data, const Tokenizer& tok,
                   const TrainConfig& cfg, const ModelGraph* teacher = nullptr);

// Monotone student shaped after an unconstrained teacher: every tensor that
// exists under the same name (embeddings, attention, norms) is copied; the
// feed-forward sublayers are fresh monotone maps over the given order with
// V = v_init +/- 0.1, so the student starts out functionally close to the
// teacher minus its feed-forward updates. The -10 default realizes weights
// around 4.5e-5 (an essentially exact identity start); desk-scale runs with
// few optimizer steps can pass a warmer v_init so the constrained map
// actually trains.
ModelGraph make_monotone_student(const ModelGraph& teacher,
                                 std::vector<std::shared_ptr<const SemanticOrder>> orders,
                                 size_t p_sem, size_t g_hidden, Activation g_act, uint64_t seed,
                                 double v_init = -10.0);

RunLog distill(const ModelGraph& teacher, ModelGraph& student, const Dataset& data,
               const Tokenizer& tok, const TrainConfig& cfg);

double mean_validation_nll(const ModelGraph& model, const std::vector<EncodedExample>& examples);

}  // namespace mono
