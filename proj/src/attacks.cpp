#include "mono/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mono {

std::vector<bool> default_candidate_mask(size_t vocab) {
  std::vector<bool> mask(vocab, true);
  for (size_t id : {kPadId, kBosId, kEosId, kUnkId})
    if (id < vocab) mask[id] = false;
  return mask;
}

std::vector<bool> biased_candidate_vocabulary(const Tokenizer& tok,
                                              const std::vector<EncodedExample>& train,
                                              double top_fraction) {
  check(top_fraction >= 0.0 && top_fraction <= 1.0, "biased vocabulary: bad fraction");
  std::vector<bool> mask(tok.vocab(), false);
  std::vector<size_t> freq(tok.vocab(), 0);
  for (const auto& e : train)
    for (size_t id : e.src)
      if (id < tok.vocab()) ++freq[id];

  // Punctuation and special characters: no alphanumeric content at all.
  for (size_t id = kUnkId + 1; id < tok.vocab(); ++id) {
    bool has_alnum = false;
    for (char c : tok.token(id))
      if (std::isalnum(static_cast<unsigned char>(c))) has_alnum = true;
    if (!has_alnum) mask[id] = true;
  }

  std::vector<size_t> by_freq;
  for (size_t id = kUnkId + 1; id < tok.vocab(); ++id)
    if (freq[id] > 0) by_freq.push_back(id);
  std::stable_sort(by_freq.begin(), by_freq.end(),
                   [&](size_t a, size_t b) { return freq[a] > freq[b]; });
  const size_t keep = std::max<size_t>(1, size_t(top_fraction * double(by_freq.size())));
  for (size_t i = 0; i < std::min(keep, by_freq.size()); ++i) mask[by_freq[i]] = true;

  return mask;
}

Tensor source_embedding_gradients(const ModelGraph& model, const std::vector<size_t>& src,
                                  const std::vector<size_t>& targets) {
  Tape tape;
  Tensor zero = Tensor::zeros({src.size(), model.config().d_model});
  zero.requires_grad = true;
  Var offset = tape.leaf(std::move(zero));
  TapeBinding b =
      model.bind_forward(tape, src, ModelGraph::decoder_input(targets), false, offset);
  Var loss = nll_loss_node(tape, b.logits, ModelGraph::decoder_targets(targets));
  tape.backward(loss);
  return tape.grad(offset);
}

namespace {

// Embedding rows as seen by the attack scorer.
const Tensor& embedding_table(const ModelGraph& model) {
  for (const auto& p : model.params())
    if (p.name == "emb") return *p.t;
  fail("attack: model has no embedding table");
}

double first_order_gain(const Tensor& emb, size_t cand, size_t orig, const Tensor& grads,
                        size_t pos) {
  const size_t d = emb.shape[1];
  double acc = 0.0;
  for (size_t j = 0; j < d; ++j)
    acc += (emb.at(cand, j) - emb.at(orig, j)) * grads.at(pos, j);
  return acc;
}

}  // namespace

AttackOutcome hotflip(const ModelGraph& model, const EncodedExample& example,
                      const HotFlipConfig& cfg, const GenerationEval* gen) {
  const size_t vocab = model.config().vocab;
  std::vector<bool> mask = cfg.candidate_mask.empty() ? default_candidate_mask(vocab)
                                                      : cfg.candidate_mask;
  check(mask.size() == vocab, "hotflip: candidate mask size ", mask.size(), " vs vocab ", vocab);

  AttackOutcome out;
  out.clean_loss = model.sequence_nll(example.src, example.tgt);

  std::vector<bool> protected_pos(example.src.size(), false);
  for (size_t i = 0; i < example.src.size(); ++i)
    if (example.src[i] == kPadId || example.src[i] == kEosId) protected_pos[i] = true;
  for (size_t p : cfg.protected_positions)
    if (p < protected_pos.size()) protected_pos[p] = true;

  const Tensor& emb = embedding_table(model);
  std::vector<size_t> attacked = example.src;
  size_t budget = cfg.max_replacements;

  while (budget > 0) {
    Tensor grads = source_embedding_gradients(model, attacked, example.tgt);

    // Rank attackable positions by gradient L2 norm, descending; ties go to
    // the earlier position.
    std::vector<std::pair<double, size_t>> ranked;
    for (size_t i = 0; i < attacked.size(); ++i) {
      if (protected_pos[i]) continue;
      double sq = 0.0;
      for (size_t j = 0; j < emb.shape[1]; ++j) sq += grads.at(i, j) * grads.at(i, j);
      ranked.emplace_back(-std::sqrt(sq), i);
    }
    if (ranked.empty()) break;
    std::stable_sort(ranked.begin(), ranked.end());

    const size_t flips_now = cfg.greedy ? 1 : std::min(budget, ranked.size());
    for (size_t r = 0; r < flips_now; ++r) {
      const size_t pos = ranked[r].second;
      const size_t orig = attacked[pos];
      double best_gain = -INFINITY;  // the argmax is taken even when no
      size_t best_tok = orig;        // candidate improves to first order
      for (size_t cand = 0; cand < vocab; ++cand) {
        if (!mask[cand] || cand == orig) continue;
        const double gain = first_order_gain(emb, cand, orig, grads, pos);
        if (gain > best_gain) {
          best_gain = gain;
          best_tok = cand;
        }
      }
      if (best_tok != orig) {
        attacked[pos] = best_tok;
        out.replacements.emplace_back(pos, best_tok);
      }
      protected_pos[pos] = true;  // one substitution per position
      --budget;
      if (budget == 0) break;
    }
    if (!cfg.greedy) break;
  }

  out.attacked_loss = model.sequence_nll(attacked, example.tgt);

  if (gen) {
    check(gen->tok != nullptr, "hotflip: generation eval needs a tokenizer");
    const std::string clean_text = gen->tok->decode(decode(model, example.src, gen->decode).tokens);
    const std::string att_text = gen->tok->decode(decode(model, attacked, gen->decode).tokens);
    out.clean_rouge_l = rouge_all(clean_text, gen->reference_text).rougeL.f1;
    out.attacked_rouge_l = rouge_all(att_text, gen->reference_text).rougeL.f1;
  }
  return out;
}

double triggered_batch_loss(const ModelGraph& model, const std::vector<EncodedExample>& examples,
                            const std::vector<size_t>& trigger) {
  check(!examples.empty(), "triggered_batch_loss: no examples");
  double acc = 0.0;
  for (const auto& e : examples) {
    std::vector<size_t> src = trigger;
    src.insert(src.end(), e.src.begin(), e.src.end());
    acc += model.sequence_nll(src, e.tgt);
  }
  return acc / double(examples.size());
}

namespace {

// Mean source-embedding gradient at one trigger position over the batch.
std::vector<double> trigger_position_gradient(const ModelGraph& model,
                                              const std::vector<EncodedExample>& examples,
                                              const std::vector<size_t>& trigger, size_t pos) {
  std::vector<double> g(model.config().d_model, 0.0);
  for (const auto& e : examples) {
    std::vector<size_t> src = trigger;
    src.insert(src.end(), e.src.begin(), e.src.end());
    Tensor grads = source_embedding_gradients(model, src, e.tgt);
    for (size_t j = 0; j < g.size(); ++j) g[j] += grads.at(pos, j);
  }
  for (double& x : g) x /= double(examples.size());
  return g;
}

}  // namespace

TriggerResult uat_search(const ModelGraph& model, const std::vector<EncodedExample>& train,
                         const TriggerConfig& cfg) {
  check(!train.empty(), "uat_search: need at least one training example");
  check(cfg.length >= 1 && cfg.restarts >= 1 && cfg.iterations >= 1,
        "uat_search: length, restarts and iterations must be >= 1");
  const size_t vocab = model.config().vocab;
  std::vector<bool> mask = cfg.candidate_mask.empty() ? default_candidate_mask(vocab)
                                                      : cfg.candidate_mask;
  check(mask.size() == vocab, "uat_search: candidate mask size mismatch");
  std::vector<size_t> candidates;
  for (size_t id = 0; id < vocab; ++id)
    if (mask[id]) candidates.push_back(id);
  check(!candidates.empty(), "uat_search: empty candidate vocabulary");

  size_t max_src = 0;
  for (const auto& e : train) max_src = std::max(max_src, e.src.size());
  check(cfg.length + max_src <= model.config().max_len,
        "uat_search: trigger length ", cfg.length, " plus longest source ", max_src,
        " exceeds the model's sequence budget ", model.config().max_len);

  const Tensor& emb = embedding_table(model);
  Rng rng(cfg.seed);

  TriggerResult best;
  best.clean_loss = triggered_batch_loss(model, train, {});
  best.train_loss = -INFINITY;

  for (size_t restart = 0; restart < cfg.restarts; ++restart) {
    Rng rrng = rng.split("restart", restart);
    std::vector<size_t> trig(cfg.length);
    for (auto& t : trig) t = candidates[rrng.below(candidates.size())];
    double cur_loss = triggered_batch_loss(model, train, trig);
    std::vector<double> history = {cur_loss};

    for (size_t iter = 0; iter < cfg.iterations; ++iter) {
      bool changed = false;
      for (size_t pos = 0; pos < cfg.length; ++pos) {
        // Shortlist by the first-order estimate unless the candidate set is
        // small enough for an exact sweep.
        std::vector<size_t> shortlist;
        if (candidates.size() <= cfg.exact_sweep_vocab) {
          shortlist = candidates;
        } else {
          const std::vector<double> g =
              trigger_position_gradient(model, train, trig, pos);
          std::vector<std::pair<double, size_t>> scored;
          for (size_t cand : candidates) {
            if (cand == trig[pos]) continue;
            double gain = 0.0;
            for (size_t j = 0; j < g.size(); ++j)
              gain += (emb.at(cand, j) - emb.at(trig[pos], j)) * g[j];
            scored.emplace_back(-gain, cand);
          }
          std::stable_sort(scored.begin(), scored.end());
          for (size_t i = 0; i < std::min(cfg.shortlist, scored.size()); ++i)
            shortlist.push_back(scored[i].second);
        }

        const size_t orig = trig[pos];
        size_t best_tok = orig;
        double best_loss = cur_loss;
        for (size_t cand : shortlist) {
          if (cand == orig) continue;
          trig[pos] = cand;
          const double loss = triggered_batch_loss(model, train, trig);
          if (loss > best_loss) {
            best_loss = loss;
            best_tok = cand;
          }
        }
        trig[pos] = best_tok;
        if (best_tok != orig) {
          cur_loss = best_loss;
          changed = true;
        }
      }
      history.push_back(cur_loss);
      if (!changed) break;  // coordinate-wise fixed point
    }

    if (cur_loss > best.train_loss) {
      best.train_loss = cur_loss;
      best.tokens = trig;
      best.best_loss_by_sweep = history;
    }
  }
  return best;
}

Tensor transfer_matrix(const std::vector<const ModelGraph*>& models,
                       const std::vector<std::vector<size_t>>& triggers,
                       const std::vector<EncodedExample>& test_examples) {
  check(!models.empty() && !triggers.empty(), "transfer_matrix: empty inputs");
  check(!test_examples.empty(), "transfer_matrix: no test examples");
  for (const auto* m : models)
    check(m->config().vocab == models[0]->config().vocab,
          "transfer_matrix: models use different tokenizers (vocab ", m->config().vocab, " vs ",
          models[0]->config().vocab, ")");

  Tensor out = Tensor::zeros({models.size(), triggers.size()});
  for (size_t i = 0; i < models.size(); ++i) {
    const double clean = triggered_batch_loss(*models[i], test_examples, {});
    for (size_t j = 0; j < triggers.size(); ++j) {
      const double trig = triggered_batch_loss(*models[i], test_examples, triggers[j]);
      out.at(i, j) = 100.0 * (trig - clean) / clean;
    }
  }
  return out;
}

void write_transfer_csv(const Tensor& matrix, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "transfer csv: cannot write ", path);
  out << "model";
  for (size_t j = 0; j < matrix.shape[1]; ++j) out << ",trigger" << j;
  out << "\n";
  char buf[64];
  for (size_t i = 0; i < matrix.shape[0]; ++i) {
    out << "model" << i;
    for (size_t j = 0; j < matrix.shape[1]; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", matrix.at(i, j));
      out << buf;
    }
    out << "\n";
  }
  check(out.good(), "transfer csv: write failed for ", path);
}

}  // namespace mono
