#pragma once

#include <map>
#include <string>
#include <vector>

namespace mono {

// Reserved token ids, by convention the first four vocabulary lines.
constexpr size_t kPadId = 0;
constexpr size_t kBosId = 1;
constexpr size_t kEosId = 2;
constexpr size_t kUnkId = 3;

extern const char* const kPadTok;
extern const char* const kBosTok;
extern const char* const kEosTok;
extern const char* const kUnkTok;

// Whitespace tokenizer over a fixed vocabulary file: one token per line,
// id = line number.
class Tokenizer {
 public:
  static Tokenizer from_tokens(std::vector<std::string> tokens);
  static Tokenizer load(const std::string& path);
  void save(const std::string& path) const;

  size_t vocab() const { return tokens_.size(); }
  const std::string& token(size_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool has(const std::string& tok) const { return index_.count(tok) > 0; }
  size_t id(const std::string& tok) const;  // kUnkId if absent

  std::vector<size_t> encode(const std::string& text) const;
  // Joins tokens with spaces; special tokens are skipped.
  std::string decode(const std::vector<size_t>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, size_t> index_;
};

}  // namespace mono
