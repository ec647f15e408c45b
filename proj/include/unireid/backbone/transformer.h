#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace unireid {

// Multi-head self-attention over [batch, len, width] sequences.
class SelfAttentionImpl : public torch::nn::Module {
 public:
  SelfAttentionImpl(int64_t width, int64_t heads);

  // attn_bias is additive and broadcastable to [batch, heads, len, len]
  // (for example a causal [len, len] mask or a [batch, 1, 1, len] key mask).
  torch::Tensor forward(const torch::Tensor& x,
                        const torch::Tensor& attn_bias = {});

  torch::nn::Linear qkv{nullptr};
  torch::nn::Linear out{nullptr};

 private:
  int64_t width_;
  int64_t heads_;
};
TORCH_MODULE(SelfAttention);

// Pre-norm ViT block: x + attn(ln(x)), then x + mlp(ln(x)) with GELU.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int64_t width, int64_t heads, int64_t mlp_ratio);

  torch::Tensor forward(const torch::Tensor& x,
                        const torch::Tensor& attn_bias = {});

  torch::nn::LayerNorm ln_attn{nullptr};
  SelfAttention attn{nullptr};
  torch::nn::LayerNorm ln_mlp{nullptr};
  torch::nn::Linear fc{nullptr};
  torch::nn::Linear proj{nullptr};
};
TORCH_MODULE(ResidualBlock);

// Stack of residual blocks. When finite-checking is on, a non-finite
// activation raises NumericError naming the offending layer.
class TransformerImpl : public torch::nn::Module {
 public:
  TransformerImpl(int64_t width, int64_t layers, int64_t heads,
                  int64_t mlp_ratio);

  torch::Tensor forward(torch::Tensor x, const torch::Tensor& attn_bias = {});

  int64_t width() const { return width_; }
  int64_t num_layers() const { return static_cast<int64_t>(blocks_.size()); }
  ResidualBlock& block(int64_t i) { return blocks_.at(static_cast<size_t>(i)); }

  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  int64_t width_;
  std::vector<ResidualBlock> blocks_;
  bool check_finite_ = true;
};
TORCH_MODULE(Transformer);

// [len, len] additive mask with -inf above the diagonal.
torch::Tensor causal_bias(int64_t len, const torch::TensorOptions& options);

// [batch, 1, 1, len] additive mask hiding positions at or beyond each row's
// valid length.
torch::Tensor key_padding_bias(const torch::Tensor& valid_lengths, int64_t len,
                               const torch::TensorOptions& options);

// Truncated normal (|x| <= 2 sigma) initializer.
void trunc_normal_(torch::Tensor& t, double stddev);

}  // namespace unireid
