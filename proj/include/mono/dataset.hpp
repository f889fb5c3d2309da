#pragma once

#include <string>
#include <vector>

#include "mono/rng.hpp"
#include "mono/tokenizer.hpp"

namespace mono {

struct Example {
  std::string source;
  std::string target;
};

struct Dataset {
  std::vector<Example> examples;
  size_t size() const { return examples.size(); }
};

// JSON Lines with "source" and "target" string fields, one record per line.
Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& data, const std::string& path);

struct Split {
  std::vector<size_t> train;
  std::vector<size_t> val;
};

// Deterministic split by hash of (line index, seed).
Split split_indices(size_t n, double val_fraction, uint64_t seed);

// Fixed toy vocabulary: the four reserved tokens, a small word list and
// punctuation. Fits in 64 ids so exact attack sweeps stay affordable.
std::vector<std::string> toy_vocabulary();

// Sequence copy: target repeats the source.
Dataset make_copy_dataset(size_t n, Rng& rng);

// Synthetic summarization: the source is a few clauses separated by
// punctuation; the target is the first clause and the final period. With
// style_tail set, a uniformly random style word (never present in sources)
// ends each target, giving the task an irreducible entropy floor the way
// real summaries carry unpredictable style variation.
Dataset make_firstclause_dataset(size_t n, Rng& rng, size_t min_clauses = 2,
                                 size_t max_clauses = 4, bool style_tail = false);

// The style words used by the generator's tail.
const std::vector<std::string>& style_words();

}  // namespace mono
