#include "unireid/data/vocabulary.h"

#include <algorithm>
#include <cctype>
#include <set>

#include "unireid/backbone/model_config.h"
#include "unireid/errors.h"

namespace unireid {
namespace {

constexpr const char* kTemplate[] = {"a", "photo", "of", "and", "person"};

}  // namespace

std::vector<std::string> split_words(std::string_view caption) {
  std::vector<std::string> words;
  std::string current;
  for (char c : caption) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc) || std::ispunct(uc)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

void Vocabulary::add(const std::string& word) {
  if (ids_.count(word) != 0) return;
  ids_.emplace(word, size());
  words_.push_back(word);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& captions) {
  std::set<std::string> words(std::begin(kTemplate), std::end(kTemplate));
  for (const auto& caption : captions) {
    for (auto& w : split_words(caption)) words.insert(std::move(w));
  }
  Vocabulary vocab;
  vocab.add("<pad>");
  vocab.add("<bos>");
  vocab.add("<eos>");
  for (const auto& w : words) vocab.add(w);
  return vocab;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  std::vector<std::pair<int64_t, std::string>> entries;
  for (const auto& [word, id] : j.items()) entries.emplace_back(id.get<int64_t>(), word);
  std::sort(entries.begin(), entries.end());
  Vocabulary vocab;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != static_cast<int64_t>(i)) {
      throw DataError("vocabulary ids are not contiguous from 0");
    }
    vocab.add(entries[i].second);
  }
  if (vocab.size() < kNumSpecialTokens || vocab.word(kPadId) != "<pad>" ||
      vocab.word(kBosId) != "<bos>" || vocab.word(kEosId) != "<eos>") {
    throw DataError("vocabulary is missing the special tokens");
  }
  for (const char* w : kTemplate) {
    if (!vocab.find(w)) throw DataError(std::string("vocabulary lacks template word '") + w + "'");
  }
  return vocab;
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [word, id] : ids_) j[word] = id;
  return j;
}

std::optional<int64_t> Vocabulary::find(std::string_view word) const {
  auto it = ids_.find(word);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

PromptTemplate Vocabulary::prompt_template() const {
  PromptTemplate t;
  t.a = *find("a");
  t.photo = *find("photo");
  t.of = *find("of");
  t.and_word = *find("and");
  t.person = *find("person");
  return t;
}

std::vector<int64_t> tokenize(std::string_view caption, const Vocabulary& vocab,
                              int64_t max_len, TokenizeMode mode) {
  if (max_len < 2) throw ConfigError("max_text_len must leave room for BOS and EOS");
  std::vector<int64_t> ids = {kBosId};
  for (const auto& w : split_words(caption)) {
    if (static_cast<int64_t>(ids.size()) == max_len - 1) break;
    auto id = vocab.find(w);
    if (!id) {
      if (mode == TokenizeMode::kTrain) {
        throw DataError("word '" + w + "' is not in the vocabulary");
      }
      ids.push_back(kPadId);
    } else {
      ids.push_back(*id);
    }
  }
  ids.push_back(kEosId);
  return ids;
}

}  // namespace unireid
