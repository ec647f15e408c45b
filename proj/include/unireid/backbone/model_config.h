#pragma once

#include <cstdint>

#include "json.hpp"

namespace unireid {

// Reserved token ids shared by the tokenizer and the text encoders.
inline constexpr int64_t kPadId = 0;
inline constexpr int64_t kBosId = 1;
inline constexpr int64_t kEosId = 2;
inline constexpr int64_t kNumSpecialTokens = 3;

// Number of vocabulary words in the hierarchical prompt template
// "a photo of [id] and [inst] person".
inline constexpr int64_t kTemplateWords = 5;

// Architecture of the dual encoder, the prompt machinery and the heads.
// Defaults follow the paper-scale ViT-B/16 setup; vocab_size and
// num_identities are filled in from the training data.
struct ModelConfig {
  int64_t image_height = 384;
  int64_t image_width = 128;
  int64_t image_channels = 3;
  int64_t patch_size = 16;

  int64_t vis_width = 768;
  int64_t vis_layers = 12;
  int64_t vis_heads = 12;

  int64_t txt_width = 512;
  int64_t txt_layers = 12;
  int64_t txt_heads = 8;

  int64_t joint_dim = 512;
  int64_t vocab_size = 0;
  int64_t max_text_len = 77;
  int64_t num_identities = 0;

  int64_t id_tokens = 4;          // M_id
  int64_t inst_tokens = 4;        // K
  int64_t inversion_layers = 4;   // N_I
  int64_t mlp_ratio = 4;

  // false collapses the vision encoder to a single class token shared by
  // both tasks (the no-TRT ablation).
  bool dual_class_token = true;

  int64_t num_patches() const {
    return (image_height / patch_size) * (image_width / patch_size);
  }
  int64_t num_class_tokens() const { return dual_class_token ? 2 : 1; }
  int64_t visual_sequence_length() const {
    return num_patches() + num_class_tokens();
  }

  // Throws ConfigError on any violated invariant.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace unireid
