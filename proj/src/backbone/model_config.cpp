#include "unireid/backbone/model_config.h"

#include <string>

#include "unireid/errors.h"

namespace unireid {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("model: " + message);
}

}  // namespace

void ModelConfig::validate() const {
  require(image_height > 0 && image_width > 0 && image_channels > 0,
          "image dimensions must be positive");
  require(patch_size > 0, "patch_size must be positive");
  require(image_height % patch_size == 0 && image_width % patch_size == 0,
          "image size " + std::to_string(image_height) + "x" +
              std::to_string(image_width) + " is not divisible by patch_size " +
              std::to_string(patch_size));
  require(vis_width > 0 && vis_layers > 0 && vis_heads > 0,
          "vision transformer sizes must be positive");
  require(vis_width % vis_heads == 0, "vis_width must be divisible by vis_heads");
  require(txt_width > 0 && txt_layers > 0 && txt_heads > 0,
          "text transformer sizes must be positive");
  require(txt_width % txt_heads == 0, "txt_width must be divisible by txt_heads");
  require(joint_dim > 0, "joint_dim must be positive");
  require(mlp_ratio > 0, "mlp_ratio must be positive");
  require(id_tokens > 0, "id_tokens must be positive");
  require(inst_tokens > 0, "inst_tokens must be positive");
  require(inversion_layers > 0, "inversion_layers must be positive");
  require(vocab_size >= kNumSpecialTokens + kTemplateWords,
          "vocab_size " + std::to_string(vocab_size) +
              " cannot hold the special tokens and template words");
  require(num_identities > 0, "num_identities must be positive");
  const int64_t needed = kTemplateWords + id_tokens + inst_tokens + 2;
  require(max_text_len >= needed,
          "max_text_len " + std::to_string(max_text_len) +
              " is shorter than the full prompt (" + std::to_string(needed) +
              " tokens)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"image_height", c.image_height},
                     {"image_width", c.image_width},
                     {"image_channels", c.image_channels},
                     {"patch_size", c.patch_size},
                     {"vis_width", c.vis_width},
                     {"vis_layers", c.vis_layers},
                     {"vis_heads", c.vis_heads},
                     {"txt_width", c.txt_width},
                     {"txt_layers", c.txt_layers},
                     {"txt_heads", c.txt_heads},
                     {"joint_dim", c.joint_dim},
                     {"vocab_size", c.vocab_size},
                     {"max_text_len", c.max_text_len},
                     {"num_identities", c.num_identities},
                     {"id_tokens", c.id_tokens},
                     {"inst_tokens", c.inst_tokens},
                     {"inversion_layers", c.inversion_layers},
                     {"mlp_ratio", c.mlp_ratio},
                     {"dual_class_token", c.dual_class_token}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("image_height").get_to(c.image_height);
  j.at("image_width").get_to(c.image_width);
  j.at("image_channels").get_to(c.image_channels);
  j.at("patch_size").get_to(c.patch_size);
  j.at("vis_width").get_to(c.vis_width);
  j.at("vis_layers").get_to(c.vis_layers);
  j.at("vis_heads").get_to(c.vis_heads);
  j.at("txt_width").get_to(c.txt_width);
  j.at("txt_layers").get_to(c.txt_layers);
  j.at("txt_heads").get_to(c.txt_heads);
  j.at("joint_dim").get_to(c.joint_dim);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("max_text_len").get_to(c.max_text_len);
  j.at("num_identities").get_to(c.num_identities);
  j.at("id_tokens").get_to(c.id_tokens);
  j.at("inst_tokens").get_to(c.inst_tokens);
  j.at("inversion_layers").get_to(c.inversion_layers);
  j.at("mlp_ratio").get_to(c.mlp_ratio);
  j.at("dual_class_token").get_to(c.dual_class_token);
}

}  // namespace unireid
