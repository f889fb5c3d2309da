#include "mono/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "mono/common.hpp"

namespace mono {

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "dataset: cannot open ", path);
  Dataset data;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      fail("dataset: bad JSON at ", path, ":", lineno, " (", e.what(), ")");
    }
    check(j.contains("source") && j["source"].is_string(), "dataset: ", path, ":", lineno,
          " lacks a string 'source' field");
    check(j.contains("target") && j["target"].is_string(), "dataset: ", path, ":", lineno,
          " lacks a string 'target' field");
    data.examples.push_back({j["source"].get<std::string>(), j["target"].get<std::string>()});
  }
  return data;
}

void save_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "dataset: cannot write ", path);
  for (const auto& ex : data.examples) {
    nlohmann::json j;
    j["source"] = ex.source;
    j["target"] = ex.target;
    out << j.dump() << "\n";
  }
  check(out.good(), "dataset: write failed for ", path);
}

Split split_indices(size_t n, double val_fraction, uint64_t seed) {
  check(val_fraction >= 0.0 && val_fraction < 1.0, "split: val fraction must be in [0, 1)");
  Split s;
  for (size_t i = 0; i < n; ++i) {
    uint64_t key[2] = {seed, i};
    const uint64_t h = fnv1a(key, sizeof key);
    const double u = double(h >> 11) * 0x1.0p-53;
    (u < val_fraction ? s.val : s.train).push_back(i);
  }
  return s;
}

std::vector<std::string> toy_vocabulary() {
  std::vector<std::string> v = {kPadTok, kBosTok, kEosTok, kUnkTok};
  const char* words[] = {
      "the",   "a",     "cat",   "dog",    "bird",  "house", "tree",   "river",  "stone",
      "cloud", "light", "dark",  "red",    "blue",  "green", "big",    "small",  "old",
      "new",   "fast",  "slow",  "runs",   "jumps", "sleeps", "sings", "walks",  "flies",
      "swims", "eats",  "finds", "sees",   "holds", "makes", "takes",  "gives",  "keeps",
      "turns", "opens", "wind",  "rain",   "snow",  "sun",   "moon",   "star"};
  for (const char* w : words) v.push_back(w);
  for (const auto& w : style_words()) v.push_back(w);
  for (const char* p : {",", ";", ".", "!", "?"}) v.push_back(p);
  return v;
}

const std::vector<std::string>& style_words() {
  static const std::vector<std::string> words = {"calmly", "boldly", "gently", "quickly",
                                                 "softly"};
  return words;
}

namespace {

// Content words only: skip the reserved ids, style words and punctuation.
std::vector<std::string> content_words() {
  const auto& style = style_words();
  std::vector<std::string> out;
  for (const auto& t : toy_vocabulary()) {
    if (t.front() == '<') continue;
    if (!std::isalnum(static_cast<unsigned char>(t.front()))) continue;
    if (std::find(style.begin(), style.end(), t) != style.end()) continue;
    out.push_back(t);
  }
  return out;
}

std::string sample_clause(const std::vector<std::string>& words, Rng& rng, size_t lo, size_t hi) {
  const size_t n = lo + rng.below(hi - lo + 1);
  std::string clause;
  for (size_t i = 0; i < n; ++i) {
    if (i) clause += ' ';
    clause += words[rng.below(words.size())];
  }
  return clause;
}

}  // namespace

Dataset make_copy_dataset(size_t n, Rng& rng) {
  const std::vector<std::string> words = content_words();
  Dataset data;
  for (size_t i = 0; i < n; ++i) {
    std::string s = sample_clause(words, rng, 3, 8);
    data.examples.push_back({s, s});
  }
  return data;
}

Dataset make_firstclause_dataset(size_t n, Rng& rng, size_t min_clauses, size_t max_clauses,
                                 bool style_tail) {
  check(min_clauses >= 1 && max_clauses >= min_clauses, "firstclause: bad clause range");
  const std::vector<std::string> words = content_words();
  const auto& style = style_words();
  Dataset data;
  for (size_t i = 0; i < n; ++i) {
    const size_t clauses = min_clauses + rng.below(max_clauses - min_clauses + 1);
    std::string first = sample_clause(words, rng, 2, 5);
    std::string src = first;
    for (size_t c = 1; c < clauses; ++c) {
      src += rng.uniform() < 0.5 ? " ," : " ;";
      src += ' ';
      src += sample_clause(words, rng, 2, 5);
    }
    src += " .";
    std::string tgt = first + " .";
    if (style_tail) {
      tgt += ' ';
      tgt += style[rng.below(style.size())];
    }
    data.examples.push_back({src, tgt});
  }
  return data;
}

}  // namespace mono
