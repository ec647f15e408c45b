#pragma once

#include <torch/torch.h>

#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "unireid/data/dataset.h"
#include "unireid/objectives/losses.h"

namespace unireid {

struct BatchConfig {
  int64_t t2i_batch = 64;
  int64_t i2i_batch = 64;
  int64_t instances_per_identity = 4;  // P of the I2I PK structure

  void validate() const;
};

// One training batch: T2I pairs first (B_t2i = [0, t2i_batch)), then the
// PK-structured I2I images.
struct JointBatch {
  torch::Tensor pixels;     // [|B|, 3, H, W]
  torch::Tensor labels;     // [|B|] int64
  torch::Tensor cameras;    // [|B|] int64
  torch::Tensor is_t2i;     // [|B|] bool
  torch::Tensor token_ids;  // [|B_t2i|, L] int64, PAD after EOS
  BatchViews views;
  std::vector<int64_t> t2i_items;  // dataset indices
  std::vector<int64_t> i2i_items;
};

// Pads token sequences to a common length with PAD.
torch::Tensor pad_token_batch(const std::vector<std::vector<int64_t>>& rows);

// T2I pairs are drawn from a per-epoch shuffle with one uniformly chosen
// caption each; I2I identities are drawn from a per-epoch shuffle with P
// instances each (with replacement, and a recorded warning, when an identity
// has fewer than P images). The full sampler state round-trips through JSON.
class JointBatchSampler {
 public:
  JointBatchSampler(const ImageSet& t2i, const ImageSet& i2i, BatchConfig config,
                    uint64_t seed);

  JointBatch next();

  int64_t steps_per_epoch() const;
  const std::vector<std::string>& warnings() const { return warnings_; }

  nlohmann::json state() const;
  void restore(const nlohmann::json& state);

 private:
  int64_t draw_t2i();
  int64_t draw_identity();

  const ImageSet* t2i_;
  const ImageSet* i2i_;
  BatchConfig config_;
  std::mt19937_64 rng_;
  std::vector<int64_t> t2i_order_;
  size_t t2i_cursor_ = 0;
  std::vector<int64_t> identity_order_;
  size_t identity_cursor_ = 0;
  std::vector<int64_t> identity_keys_;
  std::vector<std::vector<int64_t>> members_;  // per identity key index
  std::vector<std::string> warnings_;
};

}  // namespace unireid
