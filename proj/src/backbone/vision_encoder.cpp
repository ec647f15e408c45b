#include "unireid/backbone/vision_encoder.h"

#include <sstream>

#include "unireid/errors.h"

namespace unireid {

VisionEncoderImpl::VisionEncoderImpl(const ModelConfig& config)
    : config_(config) {
  const int64_t width = config.vis_width;
  patch_embed = register_module(
      "patch_embed",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(config.image_channels, width,
                                                 config.patch_size)
                            .stride(config.patch_size)
                            .bias(false)));

  class_t2i = register_parameter("class_t2i", torch::empty({width}));
  pos_class_t2i = register_parameter("pos_class_t2i", torch::empty({width}));
  trunc_normal_(class_t2i, 0.02);
  trunc_normal_(pos_class_t2i, 0.02);
  if (config.dual_class_token) {
    class_i2i = register_parameter("class_i2i", torch::empty({width}));
    pos_class_i2i = register_parameter("pos_class_i2i", torch::empty({width}));
    trunc_normal_(class_i2i, 0.02);
    trunc_normal_(pos_class_i2i, 0.02);
  }
  pos_patches =
      register_parameter("pos_patches", torch::empty({config.num_patches(), width}));
  trunc_normal_(pos_patches, 0.02);

  ln_pre = register_module(
      "ln_pre", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  transformer = register_module(
      "transformer",
      Transformer(width, config.vis_layers, config.vis_heads, config.mlp_ratio));
  ln_post = register_module(
      "ln_post", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  proj = register_module(
      "proj", torch::nn::Linear(
                  torch::nn::LinearOptions(width, config.joint_dim).bias(false)));
}

VisualFeatures VisionEncoderImpl::forward(const torch::Tensor& pixels) {
  if (pixels.dim() != 4 || pixels.size(1) != config_.image_channels ||
      pixels.size(2) != config_.image_height ||
      pixels.size(3) != config_.image_width) {
    std::ostringstream msg;
    msg << "image batch has shape " << pixels.sizes() << ", expected [batch, "
        << config_.image_channels << ", " << config_.image_height << ", "
        << config_.image_width << "]";
    throw ConfigError(msg.str());
  }
  const int64_t batch = pixels.size(0);
  const int64_t width = config_.vis_width;

  auto x = patch_embed->forward((pixels - 0.5) / 0.5);  // [B, width, h, w]
  x = x.flatten(2).transpose(1, 2) + pos_patches;      // [B, N, width]

  std::vector<torch::Tensor> parts;
  parts.push_back((class_t2i + pos_class_t2i).view({1, 1, width}).expand({batch, 1, width}));
  if (config_.dual_class_token) {
    parts.push_back(
        (class_i2i + pos_class_i2i).view({1, 1, width}).expand({batch, 1, width}));
  }
  parts.push_back(x);
  auto seq = ln_pre->forward(torch::cat(parts, 1));
  seq = ln_post->forward(transformer->forward(seq));

  VisualFeatures out;
  out.tokens = proj->forward(seq);
  TORCH_INTERNAL_ASSERT(out.tokens.size(1) == config_.visual_sequence_length());
  const int64_t n_cls = config_.num_class_tokens();
  out.cls_t2i = out.tokens.select(1, 0);
  out.cls_i2i = config_.dual_class_token ? out.tokens.select(1, 1) : out.cls_t2i;
  out.patch_tokens = out.tokens.slice(1, n_cls);
  return out;
}

}  // namespace unireid
