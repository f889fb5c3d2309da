#pragma once

#include <vector>

#include "mono/model.hpp"

namespace mono {

struct DecodeConfig {
  size_t beam = 4;
  double length_penalty = 1.2;
  size_t min_len = 10;
  size_t max_len = 80;
  size_t no_repeat_ngram = 3;  // 0 disables blocking
};

struct DecodeResult {
  std::vector<size_t> tokens;  // generated ids, EOS stripped
  double score = 0.0;          // sum logprob / length^penalty
};

// Beam search over the decoder; beam = 1 degenerates to greedy. Hypotheses
// are scored by total logprob divided by length^penalty; EOS is masked until
// min_len tokens exist and forced at max_len, and candidates that would
// complete an n-gram already present in the hypothesis are banned.
DecodeResult decode(const ModelGraph& model, const std::vector<size_t>& src,
                    const DecodeConfig& cfg);

}  // namespace mono
