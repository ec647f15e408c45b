#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "json.hpp"
#include "unireid/data/manifest.h"

namespace unireid {

struct UnifiedIdentities {
  int64_t num_identities = 0;
  // Per manifest, raw training id -> unified label in [0, num_identities).
  std::vector<std::map<int64_t, int64_t>> labels;
  // Manifests with training entries relabelled; test entries keep raw ids.
  std::vector<DatasetManifest> remapped;

  nlohmann::json to_json() const;
};

// Gives every training person one contiguous label. Raw ids declared as the
// same person (by correspondence key) across manifests share a label.
// DataError when declarations conflict: one raw id naming two persons, two
// raw ids of one manifest naming the same person, or a person that is a
// training identity in one manifest and a test identity in another.
UnifiedIdentities unify_identities(const std::vector<DatasetManifest>& manifests);

}  // namespace unireid
