#pragma once

#include <torch/torch.h>

#include "unireid/backbone/model_config.h"
#include "unireid/backbone/transformer.h"

namespace unireid {

struct TextFeatures {
  torch::Tensor eos;             // [batch, d_e], projection of the EOS token
  torch::Tensor token_features;  // [batch, L, d_t], after the final norm
  torch::Tensor eos_index;       // [batch] int64
};

// Causal text transformer pooled at the EOS position. The same module type
// backs the trainable caption encoder and the frozen prompt encoder.
class TextEncoderImpl : public torch::nn::Module {
 public:
  explicit TextEncoderImpl(const ModelConfig& config);

  // token_ids: [batch, L] int64, each row holding an EOS followed only by
  // padding. Throws InputError on a missing EOS or L > max_text_len.
  TextFeatures forward(const torch::Tensor& token_ids);

  // Runs the transformer over already-embedded tokens (prompt splicing).
  // embeddings: [batch, L, d_t]; eos_index: [batch] int64.
  TextFeatures forward_embeddings(const torch::Tensor& embeddings,
                                  const torch::Tensor& eos_index);

  // Vocabulary embeddings, [..., d_t].
  torch::Tensor embed_tokens(const torch::Tensor& token_ids);

  const ModelConfig& config() const { return config_; }

  torch::nn::Embedding token_embedding{nullptr};
  torch::Tensor positional;  // [max_text_len, d_t]
  Transformer transformer{nullptr};
  torch::nn::LayerNorm ln_final{nullptr};
  torch::nn::Linear proj{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(TextEncoder);

// Position of the first EOS in each row; InputError if a row has none.
torch::Tensor find_eos(const torch::Tensor& token_ids);

}  // namespace unireid
