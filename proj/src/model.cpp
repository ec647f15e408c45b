#include "unireid/model.h"

#include <cmath>

namespace unireid {

UnifiedReidModelImpl::UnifiedReidModelImpl(const ModelConfig& config,
                                           const PromptTemplate& words,
                                           double temperature)
    : config_(config),
      assembler_(words, config.id_tokens, config.inst_tokens) {
  config_.validate();
  visual = register_module("visual", VisionEncoder(config_));
  text = register_module("text", TextEncoder(config_));
  prompt_encoder = register_module("prompt_encoder", TextEncoder(config_));
  id_prompts = register_module(
      "id_prompts",
      IdentityPromptBank(config_.num_identities, config_.id_tokens, config_.txt_width));
  inv_visual = register_module(
      "inv_visual",
      InversionNetwork(config_.joint_dim, config_.txt_width, config_.inst_tokens,
                       config_.inversion_layers, config_.txt_heads, config_.mlp_ratio));
  inv_textual = register_module(
      "inv_textual",
      InversionNetwork(config_.txt_width, config_.txt_width, config_.inst_tokens,
                       config_.inversion_layers, config_.txt_heads, config_.mlp_ratio));
  t2i_classifier = register_module(
      "t2i_classifier",
      torch::nn::Linear(
          torch::nn::LinearOptions(config_.joint_dim, config_.num_identities).bias(false)));
  i2i_neck = register_module("i2i_neck", torch::nn::BatchNorm1d(config_.joint_dim));
  i2i_classifier = register_module(
      "i2i_classifier",
      torch::nn::Linear(
          torch::nn::LinearOptions(config_.joint_dim, config_.num_identities).bias(false)));
  for (auto& w : {t2i_classifier->weight, i2i_classifier->weight}) {
    torch::NoGradGuard no_grad;
    w.normal_(0.0, 0.001);
  }
  log_temperature =
      register_parameter("log_temperature", torch::tensor(std::log(temperature)));
  reset_prompt_encoder();
}

void UnifiedReidModelImpl::reset_prompt_encoder() {
  torch::NoGradGuard no_grad;
  auto src = text->named_parameters();
  for (auto& item : prompt_encoder->named_parameters()) {
    item.value().copy_(src[item.key()]);
    item.value().set_requires_grad(false);
  }
}

torch::Tensor UnifiedReidModelImpl::identity_prompt_embeddings(
    const torch::Tensor& labels) {
  auto embeddings = assembler_.assemble(*prompt_encoder, id_prompts->rows(labels), {});
  return encode_prompts(*prompt_encoder, embeddings,
                        assembler_.eos_index(PromptKind::kIdentityOnly));
}

torch::Tensor UnifiedReidModelImpl::all_identity_prompt_embeddings() {
  return identity_prompt_embeddings(
      torch::arange(config_.num_identities, torch::TensorOptions().dtype(torch::kInt64)));
}

torch::Tensor UnifiedReidModelImpl::instance_prompt_embeddings(
    const torch::Tensor& labels, const torch::Tensor& pseudo_tokens) {
  auto embeddings =
      assembler_.assemble(*prompt_encoder, id_prompts->rows(labels), pseudo_tokens);
  return encode_prompts(*prompt_encoder, embeddings,
                        assembler_.eos_index(PromptKind::kFullVisual));
}

std::vector<std::string> parameters_with_prefix(
    const torch::nn::Module& module, const std::vector<std::string>& prefixes) {
  std::vector<std::string> names;
  for (const auto& item : module.named_parameters()) {
    for (const auto& p : prefixes) {
      if (item.key().rfind(p, 0) == 0) {
        names.push_back(item.key());
        break;
      }
    }
  }
  return names;
}

}  // namespace unireid
