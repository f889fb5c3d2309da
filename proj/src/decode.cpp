#include "mono/decode.hpp"

#include <algorithm>
#include <cmath>

#include "mono/tokenizer.hpp"

namespace mono {

namespace {

struct Hyp {
  std::vector<size_t> tokens;  // generated so far (no BOS, no EOS)
  double logprob = 0.0;
  bool finished = false;

  double score(double penalty) const {
    const double len = double(std::max<size_t>(tokens.size(), 1));
    return logprob / std::pow(len, penalty);
  }
};

std::vector<double> log_softmax_row(const Tensor& logits, size_t row) {
  const size_t v = logits.shape[1];
  std::vector<double> lp(v);
  double mx = logits.at(row, 0);
  for (size_t j = 1; j < v; ++j) mx = std::max(mx, logits.at(row, j));
  double z = 0.0;
  for (size_t j = 0; j < v; ++j) z += std::exp(logits.at(row, j) - mx);
  const double lz = std::log(z) + mx;
  for (size_t j = 0; j < v; ++j) lp[j] = logits.at(row, j) - lz;
  return lp;
}

// Tokens banned because they would complete an n-gram already emitted.
std::vector<size_t> banned_ngram_completions(const std::vector<size_t>& tokens, size_t n) {
  std::vector<size_t> banned;
  if (n == 0 || tokens.size() + 1 < n) return banned;
  const size_t ctx = n - 1;
  for (size_t start = 0; start + n <= tokens.size(); ++start) {
    bool match = true;
    for (size_t k = 0; k < ctx; ++k)
      if (tokens[start + k] != tokens[tokens.size() - ctx + k]) {
        match = false;
        break;
      }
    if (match) banned.push_back(tokens[start + ctx]);
  }
  return banned;
}

}  // namespace

DecodeResult decode(const ModelGraph& model, const std::vector<size_t>& src,
                    const DecodeConfig& cfg) {
  check(cfg.beam >= 1, "decode: beam must be >= 1");
  check(cfg.max_len >= 1 && cfg.max_len + 1 <= model.config().max_len,
        "decode: max_len + 1 must fit the model's sequence limit");

  std::vector<Hyp> live(1);
  std::vector<Hyp> finished;

  for (size_t step = 0; step <= cfg.max_len && !live.empty(); ++step) {
    struct Cand {
      size_t hyp;
      size_t token;
      double logprob;
    };
    std::vector<Cand> cands;

    for (size_t hi = 0; hi < live.size(); ++hi) {
      const Hyp& h = live[hi];
      std::vector<size_t> tgt_in;
      tgt_in.push_back(kBosId);
      tgt_in.insert(tgt_in.end(), h.tokens.begin(), h.tokens.end());
      Tensor logits = model.forward_logits(src, tgt_in);
      std::vector<double> lp = log_softmax_row(logits, tgt_in.size() - 1);

      const bool eos_allowed = h.tokens.size() >= cfg.min_len;
      const bool force_eos = h.tokens.size() >= cfg.max_len;
      std::vector<size_t> banned = banned_ngram_completions(h.tokens, cfg.no_repeat_ngram);

      if (force_eos) {
        cands.push_back({hi, kEosId, h.logprob + lp[kEosId]});
        continue;
      }
      for (size_t tok = 0; tok < lp.size(); ++tok) {
        if (tok == kPadId || tok == kBosId) continue;
        if (tok == kEosId && !eos_allowed) continue;
        if (std::find(banned.begin(), banned.end(), tok) != banned.end()) continue;
        cands.push_back({hi, tok, h.logprob + lp[tok]});
      }
    }

    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.logprob > b.logprob; });

    std::vector<Hyp> next;
    for (const Cand& c : cands) {
      if (next.size() >= cfg.beam) break;
      Hyp h = live[c.hyp];
      h.logprob = c.logprob;
      if (c.token == kEosId) {
        h.finished = true;
        finished.push_back(h);
        continue;  // an EOS expansion retires the slot instead of occupying it
      }
      h.tokens.push_back(c.token);
      next.push_back(std::move(h));
    }
    live = std::move(next);
    if (finished.size() >= cfg.beam) break;
  }

  for (Hyp& h : live) finished.push_back(h);  // ran out of steps mid-flight
  check(!finished.empty(), "decode: no hypotheses produced");

  const Hyp* best = &finished.front();
  for (const Hyp& h : finished)
    if (h.score(cfg.length_penalty) > best->score(cfg.length_penalty)) best = &h;
  return DecodeResult{best->tokens, best->score(cfg.length_penalty)};
}

}  // namespace mono
