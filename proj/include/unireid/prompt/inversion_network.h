#pragma once

#include <torch/torch.h>

#include "unireid/backbone/text_encoder.h"
#include "unireid/backbone/transformer.h"
#include "unireid/backbone/vision_encoder.h"

namespace unireid {

enum class Modality { kVisual, kTextual };

// Instance-level pseudo-tokens in text token-embedding space.
struct PseudoPromptTokens {
  torch::Tensor tokens;  // [batch, K, d_t]
  Modality source = Modality::kVisual;
};

// Maps a feature sequence of one modality to K pseudo-word embeddings.
// K learnable query tokens are prepended to the adapter-mapped sequence, the
// stack runs with full self-attention, and the outputs at the query
// positions are returned.
class InversionNetworkImpl : public torch::nn::Module {
 public:
  InversionNetworkImpl(int64_t source_width, int64_t width, int64_t num_tokens,
                       int64_t layers, int64_t heads, int64_t mlp_ratio);

  // features: [batch, L, source_width]. valid_lengths ([batch] int64), when
  // given, hides feature positions at or beyond each row's length.
  torch::Tensor forward(const torch::Tensor& features,
                        const torch::Tensor& valid_lengths = {});

  int64_t num_tokens() const { return num_tokens_; }

  torch::nn::Linear adapter{nullptr};
  torch::Tensor queries;  // [K, width]
  Transformer transformer{nullptr};

 private:
  int64_t num_tokens_;
};
TORCH_MODULE(InversionNetwork);

// Pseudo-tokens from the full visual token sequence (class + patch tokens).
PseudoPromptTokens invert_visual(InversionNetwork& net,
                                 const VisualFeatures& feats);

// Pseudo-tokens from caption token features; positions after EOS are masked.
PseudoPromptTokens invert_textual(InversionNetwork& net,
                                  const TextFeatures& feats);

}  // namespace unireid
