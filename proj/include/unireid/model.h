#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "unireid/backbone/model_config.h"
#include "unireid/backbone/text_encoder.h"
#include "unireid/backbone/vision_encoder.h"
#include "unireid/prompt/identity_prompt_bank.h"
#include "unireid/prompt/inversion_network.h"
#include "unireid/prompt/prompt_assembler.h"

namespace unireid {

// Every trainable and frozen component of the unified re-identification
// model. Submodule names (visual, text, prompt_encoder, id_prompts,
// inv_visual, inv_textual, t2i_classifier, i2i_neck, i2i_classifier) prefix
// the parameter names used by checkpoints and freezing audits.
class UnifiedReidModelImpl : public torch::nn::Module {
 public:
  UnifiedReidModelImpl(const ModelConfig& config, const PromptTemplate& words,
                       double temperature);

  const ModelConfig& config() const { return config_; }
  const PromptAssembler& assembler() const { return assembler_; }

  torch::Tensor temperature() const { return log_temperature.exp(); }

  // Frozen-encoder embeddings of "a photo of [id-tokens] person" per label.
  torch::Tensor identity_prompt_embeddings(const torch::Tensor& labels);
  // The same for every training identity, [N_id, d_e].
  torch::Tensor all_identity_prompt_embeddings();
  // Frozen-encoder embeddings of the full template with the given
  // instance tokens ([batch, K, d_t]) spliced in.
  torch::Tensor instance_prompt_embeddings(const torch::Tensor& labels,
                                           const torch::Tensor& pseudo_tokens);

  // Re-initializes the prompt encoder as a frozen copy of the caption encoder.
  void reset_prompt_encoder();

  VisionEncoder visual{nullptr};
  TextEncoder text{nullptr};
  TextEncoder prompt_encoder{nullptr};
  IdentityPromptBank id_prompts{nullptr};
  InversionNetwork inv_visual{nullptr};
  InversionNetwork inv_textual{nullptr};
  torch::nn::Linear t2i_classifier{nullptr};
  torch::nn::BatchNorm1d i2i_neck{nullptr};
  torch::nn::Linear i2i_classifier{nullptr};
  torch::Tensor log_temperature;

 private:
  ModelConfig config_;
  PromptAssembler assembler_;
};
TORCH_MODULE(UnifiedReidModel);

// Names of parameters whose name starts with any of the prefixes.
std::vector<std::string> parameters_with_prefix(
    const torch::nn::Module& module, const std::vector<std::string>& prefixes);

}  // namespace unireid
