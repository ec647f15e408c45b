#include "unireid/prompt/inversion_network.h"

namespace unireid {

InversionNetworkImpl::InversionNetworkImpl(int64_t source_width, int64_t width,
                                           int64_t num_tokens, int64_t layers,
                                           int64_t heads, int64_t mlp_ratio)
    : num_tokens_(num_tokens) {
  adapter = register_module("adapter", torch::nn::Linear(source_width, width));
  queries = register_parameter("queries", torch::empty({num_tokens, width}));
  trunc_normal_(queries, 0.02);
  transformer = register_module("transformer",
                                Transformer(width, layers, heads, mlp_ratio));
}

torch::Tensor InversionNetworkImpl::forward(const torch::Tensor& features,
                                            const torch::Tensor& valid_lengths) {
  const int64_t batch = features.size(0);
  auto mapped = adapter->forward(features);
  auto q = queries.unsqueeze(0).expand({batch, num_tokens_, queries.size(1)});
  auto seq = torch::cat({q, mapped}, 1);

  torch::Tensor bias;
  if (valid_lengths.defined()) {
    bias = key_padding_bias(valid_lengths + num_tokens_, seq.size(1),
                            seq.options());
  }
  return transformer->forward(seq, bias).slice(1, 0, num_tokens_);
}

PseudoPromptTokens invert_visual(InversionNetwork& net,
                                 const VisualFeatures& feats) {
  return {net->forward(feats.tokens), Modality::kVisual};
}

PseudoPromptTokens invert_textual(InversionNetwork& net,
                                  const TextFeatures& feats) {
  return {net->forward(feats.token_features, feats.eos_index + 1),
          Modality::kTextual};
}

}  // namespace unireid
