#include "unireid/data/identity_unification.h"

#include <set>
#include <string>

#include "unireid/errors.h"

namespace unireid {

nlohmann::json UnifiedIdentities::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& m : labels) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [raw, label] : m) pairs.push_back({raw, label});
    per.push_back(pairs);
  }
  return {{"num_identities", num_identities}, {"labels", per}};
}

UnifiedIdentities unify_identities(const std::vector<DatasetManifest>& manifests) {
  // person key -> unified label, and where each key was seen
  std::map<std::string, int64_t> person_label;
  std::map<std::string, bool> person_is_train;

  UnifiedIdentities out;
  int64_t next = 0;
  for (const auto& manifest : manifests) {
    std::map<int64_t, std::string> key_of;
    std::map<std::string, int64_t> raw_of;
    for (const auto& c : manifest.correspondence) {
      auto [it, inserted] = key_of.emplace(c.identity, c.person);
      if (!inserted && it->second != c.person) {
        throw DataError(manifest.name + ": identity " + std::to_string(c.identity) +
                        " is declared as both '" + it->second + "' and '" +
                        c.person + "'");
      }
      auto [rit, rinserted] = raw_of.emplace(c.person, c.identity);
      if (!rinserted && rit->second != c.identity) {
        throw DataError(manifest.name + ": identities " + std::to_string(rit->second) +
                        " and " + std::to_string(c.identity) + " both declare '" +
                        c.person + "'");
      }
    }

    std::set<int64_t> train_ids;
    std::set<int64_t> test_ids;
    for (const auto& e : manifest.entries) {
      (e.split == Split::kTrain ? train_ids : test_ids).insert(e.identity);
    }
    for (const auto& [raw, key] : key_of) {
      const bool is_train = train_ids.count(raw) != 0;
      const bool is_test = test_ids.count(raw) != 0;
      if (!is_train && !is_test) continue;
      auto [it, inserted] = person_is_train.emplace(key, is_train);
      if (!inserted && it->second != is_train) {
        throw DataError("person '" + key +
                        "' is a training identity in one dataset and a test "
                        "identity in another");
      }
    }

    std::map<int64_t, int64_t> labels;
    for (const auto& e : manifest.entries) {
      if (e.split != Split::kTrain || labels.count(e.identity) != 0) continue;
      auto key = key_of.find(e.identity);
      if (key == key_of.end()) {
        labels[e.identity] = next++;
        continue;
      }
      auto [it, inserted] = person_label.emplace(key->second, next);
      if (inserted) ++next;
      labels[e.identity] = it->second;
    }

    DatasetManifest remapped = manifest;
    for (auto& e : remapped.entries) {
      if (e.split == Split::kTrain) e.identity = labels.at(e.identity);
    }
    out.labels.push_back(std::move(labels));
    out.remapped.push_back(std::move(remapped));
  }
  out.num_identities = next;
  return out;
}

}  // namespace unireid
