#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "unireid/prompt/prompt_assembler.h"

namespace unireid {

// Word <-> id map. Ids 0..2 are PAD, BOS, EOS; the template words are always
// present so prompts can be spliced for any training set.
class Vocabulary {
 public:
  // Builds from training captions; words are numbered in sorted order.
  static Vocabulary build(const std::vector<std::string>& captions);
  static Vocabulary from_json(const nlohmann::json& j);

  nlohmann::json to_json() const;

  int64_t size() const { return static_cast<int64_t>(words_.size()); }
  std::optional<int64_t> find(std::string_view word) const;
  const std::string& word(int64_t id) const { return words_.at(static_cast<size_t>(id)); }
  PromptTemplate prompt_template() const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  void add(const std::string& word);

  std::map<std::string, int64_t, std::less<>> ids_;
  std::vector<std::string> words_;
};

// Lowercases and splits on whitespace and punctuation.
std::vector<std::string> split_words(std::string_view caption);

enum class TokenizeMode {
  kTrain,  // unknown words are an error
  kEval,   // unknown words map to PAD
};

// BOS + word ids + EOS, truncated to max_len with EOS kept last.
std::vector<int64_t> tokenize(std::string_view caption, const Vocabulary& vocab,
                              int64_t max_len, TokenizeMode mode);

}  // namespace unireid
