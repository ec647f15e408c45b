#include "unireid/backbone/transformer.h"

#include <cmath>
#include <limits>
#include <string>

#include "unireid/errors.h"

namespace unireid {

SelfAttentionImpl::SelfAttentionImpl(int64_t width, int64_t heads)
    : width_(width), heads_(heads) {
  qkv = register_module("qkv", torch::nn::Linear(width, 3 * width));
  out = register_module("out", torch::nn::Linear(width, width));
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x,
                                         const torch::Tensor& attn_bias) {
  const int64_t batch = x.size(0);
  const int64_t len = x.size(1);
  const int64_t head_dim = width_ / heads_;

  // [3, batch, heads, len, head_dim]
  auto packed = qkv->forward(x)
                    .view({batch, len, 3, heads_, head_dim})
                    .permute({2, 0, 3, 1, 4});
  auto q = packed[0];
  auto k = packed[1];
  auto v = packed[2];

  auto scores = torch::matmul(q, k.transpose(-2, -1)) /
                std::sqrt(static_cast<double>(head_dim));
  if (attn_bias.defined()) scores = scores + attn_bias;
  auto weights = torch::softmax(scores, -1);
  auto context =
      torch::matmul(weights, v).permute({0, 2, 1, 3}).reshape({batch, len, width_});
  return out->forward(context);
}

ResidualBlockImpl::ResidualBlockImpl(int64_t width, int64_t heads,
                                     int64_t mlp_ratio) {
  ln_attn = register_module(
      "ln_attn", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  attn = register_module("attn", SelfAttention(width, heads));
  ln_mlp = register_module(
      "ln_mlp", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  fc = register_module("fc", torch::nn::Linear(width, width * mlp_ratio));
  proj = register_module("proj", torch::nn::Linear(width * mlp_ratio, width));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x,
                                         const torch::Tensor& attn_bias) {
  auto h = x + attn->forward(ln_attn->forward(x), attn_bias);
  return h + proj->forward(torch::gelu(fc->forward(ln_mlp->forward(h))));
}

TransformerImpl::TransformerImpl(int64_t width, int64_t layers, int64_t heads,
                                 int64_t mlp_ratio)
    : width_(width) {
  blocks_.reserve(static_cast<size_t>(layers));
  for (int64_t i = 0; i < layers; ++i) {
    blocks_.push_back(register_module("blocks_" + std::to_string(i),
                                      ResidualBlock(width, heads, mlp_ratio)));
  }
}

torch::Tensor TransformerImpl::forward(torch::Tensor x,
                                       const torch::Tensor& attn_bias) {
  for (size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i]->forward(x, attn_bias);
    if (check_finite_ && !torch::isfinite(x).all().item<bool>()) {
      throw NumericError("non-finite activation after transformer layer " +
                         std::to_string(i));
    }
  }
  return x;
}

torch::Tensor causal_bias(int64_t len, const torch::TensorOptions& options) {
  return torch::full({len, len}, -std::numeric_limits<double>::infinity(),
                     options)
      .triu(1);
}

torch::Tensor key_padding_bias(const torch::Tensor& valid_lengths, int64_t len,
                               const torch::TensorOptions& options) {
  auto positions =
      torch::arange(len, torch::TensorOptions().dtype(torch::kInt64)).unsqueeze(0);
  auto padded = positions >= valid_lengths.to(torch::kInt64).unsqueeze(1);
  return torch::zeros({valid_lengths.size(0), len}, options)
      .masked_fill(padded, -std::numeric_limits<double>::infinity())
      .view({valid_lengths.size(0), 1, 1, len});
}

void trunc_normal_(torch::Tensor& t, double stddev) {
  torch::NoGradGuard no_grad;
  // Inverse-CDF sampling restricted to [-2 sigma, 2 sigma].
  const double lo = std::erf(-2.0 / std::sqrt(2.0));
  const double hi = std::erf(2.0 / std::sqrt(2.0));
  t.uniform_(lo, hi);
  t.erfinv_();
  t.mul_(stddev * std::sqrt(2.0));
  t.clamp_(-2.0 * stddev, 2.0 * stddev);
}

}  // namespace unireid
