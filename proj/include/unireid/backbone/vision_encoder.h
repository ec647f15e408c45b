#pragma once

#include <torch/torch.h>

#include "unireid/backbone/model_config.h"
#include "unireid/backbone/transformer.h"

namespace unireid {

// Output of the task-routed vision encoder, everything in the joint space.
struct VisualFeatures {
  torch::Tensor cls_t2i;       // [batch, d_e]
  torch::Tensor cls_i2i;       // [batch, d_e]; aliases cls_t2i with one token
  torch::Tensor patch_tokens;  // [batch, N, d_e]
  torch::Tensor tokens;        // [batch, N + class tokens, d_e]
};

// ViT with two class tokens, one routed to each retrieval task. Each class
// token has its own learnable initial embedding and positional embedding. A
// single projection maps every output token into the joint space.
class VisionEncoderImpl : public torch::nn::Module {
 public:
  explicit VisionEncoderImpl(const ModelConfig& config);

  // pixels: [batch, C, H, W] with values in [0, 1].
  VisualFeatures forward(const torch::Tensor& pixels);

  const ModelConfig& config() const { return config_; }

  torch::nn::Conv2d patch_embed{nullptr};
  torch::Tensor class_t2i;
  torch::Tensor class_i2i;  // undefined without the dual token
  torch::Tensor pos_class_t2i;
  torch::Tensor pos_class_i2i;
  torch::Tensor pos_patches;
  torch::nn::LayerNorm ln_pre{nullptr};
  Transformer transformer{nullptr};
  torch::nn::LayerNorm ln_post{nullptr};
  torch::nn::Linear proj{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(VisionEncoder);

}  // namespace unireid
