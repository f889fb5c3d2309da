#include "mono/tokenizer.hpp"

#include <fstream>
#include <sstream>

#include "mono/common.hpp"

namespace mono {

const char* const kPadTok = "<pad>";
const char* const kBosTok = "<bos>";
const char* const kEosTok = "<eos>";
const char* const kUnkTok = "<unk>";

Tokenizer Tokenizer::from_tokens(std::vector<std::string> tokens) {
  check(tokens.size() > kUnkId, "tokenizer: vocabulary must include the four reserved tokens");
  Tokenizer t;
  t.tokens_ = std::move(tokens);
  for (size_t i = 0; i < t.tokens_.size(); ++i) {
    check(!t.tokens_[i].empty(), "tokenizer: empty token at line ", i);
    auto [it, inserted] = t.index_.emplace(t.tokens_[i], i);
    (void)it;
    check(inserted, "tokenizer: duplicate token '", t.tokens_[i], "' at line ", i);
  }
  return t;
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "tokenizer: cannot open ", path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path);
  check(out.good(), "tokenizer: cannot write ", path);
  for (const auto& t : tokens_) out << t << "\n";
  check(out.good(), "tokenizer: write failed for ", path);
}

const std::string& Tokenizer::token(size_t id) const {
  check(id < tokens_.size(), "tokenizer: id ", id, " out of range (vocab ", tokens_.size(), ")");
  return tokens_[id];
}

size_t Tokenizer::id(const std::string& tok) const {
  auto it = index_.find(tok);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<size_t> Tokenizer::encode(const std::string& text) const {
  std::vector<size_t> ids;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) ids.push_back(id(tok));
  return ids;
}

std::string Tokenizer::decode(const std::vector<size_t>& ids) const {
  std::string out;
  for (size_t id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

}  // namespace mono
