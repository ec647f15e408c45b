#include "unireid/backbone/text_encoder.h"

#include <string>

#include "unireid/errors.h"

namespace unireid {

torch::Tensor find_eos(const torch::Tensor& token_ids) {
  auto is_eos = (token_ids == kEosId);
  auto has_eos = is_eos.any(1);
  if (!has_eos.all().item<bool>()) {
    const auto row = (~has_eos).nonzero()[0][0].item<int64_t>();
    throw InputError("token sequence " + std::to_string(row) +
                     " has no EOS token");
  }
  // argmax returns the first maximal position.
  return is_eos.to(torch::kInt32).argmax(1);
}

TextEncoderImpl::TextEncoderImpl(const ModelConfig& config) : config_(config) {
  const int64_t width = config.txt_width;
  token_embedding = register_module(
      "token_embedding", torch::nn::Embedding(config.vocab_size, width));
  trunc_normal_(token_embedding->weight, 0.02);
  positional =
      register_parameter("positional", torch::empty({config.max_text_len, width}));
  trunc_normal_(positional, 0.02);
  transformer = register_module(
      "transformer",
      Transformer(width, config.txt_layers, config.txt_heads, config.mlp_ratio));
  ln_final = register_module(
      "ln_final", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  proj = register_module(
      "proj", torch::nn::Linear(
                  torch::nn::LinearOptions(width, config.joint_dim).bias(false)));
}

torch::Tensor TextEncoderImpl::embed_tokens(const torch::Tensor& token_ids) {
  return token_embedding->forward(token_ids);
}

TextFeatures TextEncoderImpl::forward(const torch::Tensor& token_ids) {
  if (token_ids.dim() != 2) {
    throw InputError("token ids must be a [batch, length] tensor");
  }
  if (token_ids.size(1) > config_.max_text_len) {
    throw InputError("token sequence length " + std::to_string(token_ids.size(1)) +
                     " exceeds max_text_len " +
                     std::to_string(config_.max_text_len));
  }
  auto eos_index = find_eos(token_ids);
  return forward_embeddings(embed_tokens(token_ids), eos_index);
}

TextFeatures TextEncoderImpl::forward_embeddings(const torch::Tensor& embeddings,
                                                 const torch::Tensor& eos_index) {
  const int64_t batch = embeddings.size(0);
  const int64_t len = embeddings.size(1);
  if (len > config_.max_text_len) {
    throw InputError("embedded sequence length " + std::to_string(len) +
                     " exceeds max_text_len " +
                     std::to_string(config_.max_text_len));
  }
  auto x = embeddings + positional.slice(0, 0, len);
  x = transformer->forward(x, causal_bias(len, x.options()));
  x = ln_final->forward(x);

  TextFeatures out;
  out.token_features = x;
  out.eos_index = eos_index.to(torch::kInt64);
  auto rows = torch::arange(batch, out.eos_index.options());
  out.eos = proj->forward(x.index({rows, out.eos_index}));
  return out;
}

}  // namespace unireid
