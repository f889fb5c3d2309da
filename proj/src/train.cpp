#include "mono/train.hpp"

#include <chrono>
#include <cmath>

namespace mono {

void TrainConfig::validate() const {
  check(lr > 0.0, "train config: learning rate must be positive");
  check(warmup_fraction >= 0.0 && warmup_fraction < 1.0,
        "train config: warmup fraction must be in [0, 1)");
  check(lambda >= 0.0 && lambda <= 1.0, "train config: lambda must be in [0, 1]");
  check(batch_size >= 1 && epochs >= 1, "train config: batch size and epochs must be positive");
  check(val_fraction >= 0.0 && val_fraction < 1.0, "train config: val fraction must be in [0, 1)");
  check(temperature > 0.0, "train config: temperature must be positive");
}

EncodedExample encode_example(const Example& ex, const Tokenizer& tok, size_t max_len) {
  EncodedExample e;
  e.src = tok.encode(ex.source);
  if (e.src.size() + 1 > max_len) e.src.resize(max_len - 1);
  e.src.push_back(kEosId);
  e.tgt = tok.encode(ex.target);
  if (e.tgt.size() + 1 > max_len) e.tgt.resize(max_len - 1);
  check(!e.tgt.empty(), "encode_example: empty target '", ex.target, "'");
  return e;
}

std::vector<EncodedExample> encode_dataset(const Dataset& data, const Tokenizer& tok,
                                           size_t max_len) {
  std::vector<EncodedExample> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples) out.push_back(encode_example(ex, tok, max_len));
  return out;
}

Var distill_loss_node(Tape& tape, Var student_logits, const Tensor& teacher_logits,
                      const std::vector<size_t>& targets, double lambda, double temperature) {
  Var ce = nll_loss_node(tape, student_logits, targets);
  if (lambda >= 1.0) return ce;

  const Tensor& sl = tape.value(student_logits);
  check(teacher_logits.shape == sl.shape, "distill: teacher logits ", teacher_logits.shape_str(),
        " vs student ", sl.shape_str());

  // Softened teacher distribution and its entropy term, plain math.
  const size_t rows = sl.shape[0], vocab = sl.shape[1];
  Tensor pt = Tensor::zeros(sl.shape);
  double teacher_entropy_sum = 0.0;
  size_t live = 0;
  for (size_t t = 0; t < rows; ++t) {
    if (targets[t] == kPadId) continue;
    ++live;
    double mx = -1e300;
    for (size_t j = 0; j < vocab; ++j) mx = std::max(mx, teacher_logits.at(t, j) / temperature);
    double z = 0.0;
    for (size_t j = 0; j < vocab; ++j) z += std::exp(teacher_logits.at(t, j) / temperature - mx);
    for (size_t j = 0; j < vocab; ++j) {
      const double p = std::exp(teacher_logits.at(t, j) / temperature - mx) / z;
      pt.at(t, j) = p;
      if (p > 0.0) teacher_entropy_sum += p * std::log(p);
    }
  }
  check(live > 0, "distill: all target positions are padding");

  // KL = sum p_T log p_T - sum p_T log p_S, averaged over live rows.
  Var logp_s = tape.log(tape.softmax_lastdim(tape.scale(student_logits, 1.0 / temperature)));
  Var cross = tape.scale(tape.sum(tape.mul(logp_s, tape.constant(pt))), -1.0 / double(live));
  Var kl = tape.add(cross, tape.constant_scalar(teacher_entropy_sum / double(live)));
  return tape.add(tape.scale(ce, lambda), tape.scale(kl, 1.0 - lambda));
}

namespace {

std::vector<std::vector<double>> snapshot_params(const std::vector<ParamRef>& params) {
  std::vector<std::vector<double>> snap;
  snap.reserve(params.size());
  for (const auto& p : params) snap.push_back(p.t->v);
  return snap;
}

void restore_params(const std::vector<ParamRef>& params,
                    const std::vector<std::vector<double>>& snap) {
  for (size_t i = 0; i < params.size(); ++i) params[i].t->v = snap[i];
}

void assert_monotone_weights(const ModelGraph& model) {
  if (model.config().ffn_mode != FfnMode::Monotone) return;
  for (size_t i = 0; i < model.ffn_sublayer_count(); ++i)
    check(model.realized_ffn(i).g.min_weight() >= 0.0,
          "train: realized monotone weight went negative in sublayer ", i);
}

}  // namespace

double mean_validation_nll(const ModelGraph& model, const std::vector<EncodedExample>& examples) {
  check(!examples.empty(), "validation: no examples");
  double acc = 0.0;
  for (const auto& e : examples) acc += model.sequence_nll(e.src, e.tgt);
  return acc / double(examples.size());
}

RunLog train_model(ModelGraph& model, const Dataset& data, const Tokenizer& tok,
                   const TrainConfig& cfg, const ModelGraph* teacher) {
  cfg.validate();
  check(data.size() >= 1, "train: dataset is empty");
  if (teacher) {
    check(teacher->config().vocab == model.config().vocab,
          "train: teacher and student vocabularies differ");
    check(teacher->config().max_len >= model.config().max_len,
          "train: teacher cannot score the student's sequence budget");
  }
  const auto t_start = std::chrono::steady_clock::now();

  std::vector<EncodedExample> encoded = encode_dataset(data, tok, model.config().max_len);
  Split split = split_indices(encoded.size(), cfg.val_fraction, cfg.seed);
  check(!split.train.empty(), "train: empty training split");
  std::vector<EncodedExample> val;
  for (size_t i : split.val) val.push_back(encoded[i]);

  Rng run_rng(cfg.seed);
  auto params = model.params();
  AdamW opt;
  RunLog log;
  log.adam_beta1 = opt.beta1();
  log.adam_beta2 = opt.beta2();
  log.adam_eps = opt.eps();

  const size_t steps_per_epoch = (split.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const size_t total_steps = steps_per_epoch * cfg.epochs;
  size_t global_step = 0;

  std::vector<std::vector<double>> best_snapshot = snapshot_params(params);
  log.best_val = val.empty() ? 0.0 : mean_validation_nll(model, val);
  {
    std::vector<EncodedExample> train_view;
    for (size_t i : split.train) train_view.push_back(encoded[i]);
    log.initial_loss = mean_validation_nll(model, train_view);
  }

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order = split.train;
    Rng shuffle_rng = run_rng.split("shuffle", epoch);
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t steps = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const size_t b1 = std::min(b0 + cfg.batch_size, order.size());
      model.zero_grads();
      double batch_loss = 0.0;
      for (size_t bi = b0; bi < b1; ++bi) {
        const EncodedExample& e = encoded[order[bi]];
        const std::vector<size_t> tgt_in = ModelGraph::decoder_input(e.tgt);
        const std::vector<size_t> tgt_out = ModelGraph::decoder_targets(e.tgt);

        Tape tape;
        TapeBinding bind = model.bind_forward(tape, e.src, tgt_in, true);
        Var loss;
        if (teacher && cfg.lambda < 1.0) {
          Tensor tlogits = teacher->forward_logits(e.src, tgt_in);
          loss = distill_loss_node(tape, bind.logits, tlogits, tgt_out, cfg.lambda,
                                   cfg.temperature);
        } else {
          loss = nll_loss_node(tape, bind.logits, tgt_out);
        }
        batch_loss += tape.value(loss).scalar_value();
        tape.backward(loss);
        const double inv_batch = 1.0 / double(b1 - b0);
        for (size_t pi = 0; pi < params.size(); ++pi) {
          Tensor g = tape.grad(bind.param_leaves[pi].second);
          params[pi].t->ensure_grad();
          for (size_t k = 0; k < g.v.size(); ++k) (*params[pi].t->grad)[k] += inv_batch * g.v[k];
        }
      }
      batch_loss /= double(b1 - b0);
      check(std::isfinite(batch_loss) && batch_loss < 1e4,
            "train: divergence at epoch ", epoch, " step ", steps, " (loss ", batch_loss, ")");

      clip_grad_norm(params, cfg.clip_norm);
      const double lr_t = cfg.lr * warmup_linear(global_step, total_steps, cfg.warmup_fraction);
      log.lr_by_step.push_back(lr_t);
      opt.step(params, lr_t, cfg.weight_decay);

      epoch_loss += batch_loss;
      ++steps;
      ++global_step;
    }
    assert_monotone_weights(model);

    log.train_loss.push_back(epoch_loss / double(steps));
    const double vloss = val.empty() ? log.train_loss.back() : mean_validation_nll(model, val);
    check(std::isfinite(vloss), "train: non-finite validation loss at epoch ", epoch);
    log.val_loss.push_back(vloss);
    if (epoch == 0 || vloss < log.best_val) {
      log.best_val = vloss;
      log.best_epoch = epoch;
      best_snapshot = snapshot_params(params);
    }
  }

  restore_params(params, best_snapshot);
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return log;
}

ModelGraph make_monotone_student(const ModelGraph& teacher,
                                 std::vector<std::shared_ptr<const SemanticOrder>> orders,
                                 size_t p_sem, size_t g_hidden, Activation g_act, uint64_t seed,
                                 double v_init) {
  ModelConfig cfg = teacher.config();
  cfg.ffn_mode = FfnMode::Monotone;
  cfg.p_sem = p_sem;
  cfg.g_hidden = g_hidden;
  cfg.g_act = g_act;
  ModelGraph student(cfg, std::move(orders));
  Rng rng(seed);
  student.init_params(rng);

  auto tparams = teacher.params();
  for (auto& sp : student.params()) {
    bool shared = false;
    for (const auto& tp : tparams)
      if (tp.name == sp.name) {
        check(tp.t->shape == sp.t->shape, "student surgery: shape clash for ", sp.name);
        sp.t->v = tp.t->v;
        shared = true;
      }
    if (!shared && v_init != -10.0 && sp.name.find(".ffn.g.l") != std::string::npos &&
        sp.name.back() == 'v') {
      Rng r = rng.split("warm." + sp.name);
      for (double& x : sp.t->v) x = v_init + r.uniform(-0.1, 0.1);
    }
  }
  return student;
}

RunLog distill(const ModelGraph& teacher, ModelGraph& student, const Dataset& data,
               const Tokenizer& tok, const TrainConfig& cfg) {
  return train_model(student, data, tok, cfg, &teacher);
}

}  // namespace mono
