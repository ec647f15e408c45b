#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "unireid/data/identity_unification.h"
#include "unireid/data/manifest.h"
#include "unireid/data/png_io.h"
#include "unireid/data/vocabulary.h"

namespace unireid {

// Decoded images of one split held in memory.
struct ImageSet {
  torch::Tensor pixels;                 // [n, 3, H, W] float32 in [0, 1]
  std::vector<int64_t> identities;      // unified label (train) or raw id (test)
  std::vector<int64_t> cameras;
  std::vector<std::vector<std::string>> captions;
  std::vector<std::vector<std::vector<int64_t>>> tokens;  // per caption
  std::vector<std::string> paths;

  int64_t size() const { return static_cast<int64_t>(identities.size()); }
};

torch::Tensor image_to_tensor(const RgbImage& image);

ImageSet load_image_set(const DatasetManifest& manifest,
                        const std::function<bool(Split)>& keep);

void tokenize_captions(ImageSet& set, const Vocabulary& vocab, int64_t max_len,
                       TokenizeMode mode);

struct TrainingData {
  Vocabulary vocab;
  UnifiedIdentities identities;
  ImageSet t2i_train;
  ImageSet i2i_train;
  ImageSet t2i_gallery;  // T2I test images; their captions are the queries
  ImageSet i2i_query;
  ImageSet i2i_gallery;
};

// Loads both manifests, unifies training identities, builds the vocabulary
// from training captions (or reuses `vocab` when given) and tokenizes.
TrainingData load_training_data(const std::filesystem::path& t2i_manifest,
                                const std::filesystem::path& i2i_manifest,
                                int64_t max_text_len,
                                const Vocabulary* vocab = nullptr);

}  // namespace unireid
