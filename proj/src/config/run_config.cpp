#include "unireid/config/run_config.h"

#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "toml.hpp"
#include "unireid/errors.h"
#include "unireid/random.h"

namespace unireid {
namespace {

// Reads typed keys out of one TOML table and rejects anything unread.
class SectionReader {
 public:
  SectionReader(const toml::table* table, std::string name)
      : table_(table), name_(std::move(name)) {}

  void read(const char* key, int64_t& out) {
    if (auto* node = lookup(key)) {
      auto v = node->as_integer();
      if (v == nullptr) fail(key, "an integer");
      out = v->get();
    }
  }

  void read(const char* key, uint64_t& out) {
    int64_t v = static_cast<int64_t>(out);
    read(key, v);
    if (v < 0) throw ConfigError(name_ + "." + key + " must be non-negative");
    out = static_cast<uint64_t>(v);
  }

  void read(const char* key, double& out) {
    if (auto* node = lookup(key)) {
      if (auto f = node->as_floating_point()) {
        out = f->get();
      } else if (auto i = node->as_integer()) {
        out = static_cast<double>(i->get());
      } else {
        fail(key, "a number");
      }
    }
  }

  void read(const char* key, bool& out) {
    if (auto* node = lookup(key)) {
      auto v = node->as_boolean();
      if (v == nullptr) fail(key, "a boolean");
      out = v->get();
    }
  }

  void read(const char* key, std::string& out) {
    if (auto* node = lookup(key)) {
      auto v = node->as_string();
      if (v == nullptr) fail(key, "a string");
      out = v->get();
    }
  }

  void finish() const {
    if (table_ == nullptr) return;
    for (const auto& [key, node] : *table_) {
      if (seen_.count(std::string(key.str())) == 0) {
        throw ConfigError("unknown config key '" + qualified(std::string(key.str())) + "'");
      }
    }
  }

 private:
  const toml::node* lookup(const char* key) {
    seen_.insert(key);
    return table_ == nullptr ? nullptr : table_->get(key);
  }

  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError("config key '" + qualified(key) + "' must be " + expected);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

const toml::table* section(const toml::table& root, const char* name) {
  auto* node = root.get(name);
  if (node == nullptr) return nullptr;
  auto* t = node->as_table();
  if (t == nullptr) throw ConfigError(std::string("config section '") + name + "' must be a table");
  return t;
}

RunConfig from_table(const toml::table& root) {
  RunConfig c;
  static const std::set<std::string> kSections = {"model", "data",     "stage1", "stage2",
                                                  "loss",  "ablation", "eval",   "output"};
  for (const auto& [key, node] : root) {
    const std::string k(key.str());
    if (k != "seed" && kSections.count(k) == 0) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  SectionReader top(&root, "");
  top.read("seed", c.seed);

  SectionReader model(section(root, "model"), "model");
  model.read("image_height", c.model.image_height);
  model.read("image_width", c.model.image_width);
  model.read("patch_size", c.model.patch_size);
  model.read("vis_width", c.model.vis_width);
  model.read("vis_layers", c.model.vis_layers);
  model.read("vis_heads", c.model.vis_heads);
  model.read("txt_width", c.model.txt_width);
  model.read("txt_layers", c.model.txt_layers);
  model.read("txt_heads", c.model.txt_heads);
  model.read("joint_dim", c.model.joint_dim);
  model.read("max_text_len", c.model.max_text_len);
  model.read("id_tokens", c.model.id_tokens);
  model.read("inst_tokens", c.model.inst_tokens);
  model.read("inversion_layers", c.model.inversion_layers);
  model.read("mlp_ratio", c.model.mlp_ratio);
  model.finish();

  SectionReader data(section(root, "data"), "data");
  data.read("t2i_manifest", c.data.t2i_manifest);
  data.read("i2i_manifest", c.data.i2i_manifest);
  data.read("identities", c.data.synthetic.n_identities);
  data.read("images_per_identity", c.data.synthetic.images_per_identity);
  data.read("cameras", c.data.synthetic.n_cameras);
  data.read("test_identities", c.data.synthetic.test_identities);
  data.read("shared_identities", c.data.synthetic.shared_identities);
  data.read("genders", c.data.synthetic.genders);
  data.read("hair_colors", c.data.synthetic.hair_colors);
  data.read("top_colors", c.data.synthetic.top_colors);
  data.read("bottom_colors", c.data.synthetic.bottom_colors);
  data.read("actions", c.data.synthetic.actions);
  data.read("carried_objects", c.data.synthetic.carried_objects);
  data.read("t2i_batch", c.data.batch.t2i_batch);
  data.read("i2i_batch", c.data.batch.i2i_batch);
  data.read("instances_per_identity", c.data.batch.instances_per_identity);
  data.finish();

  SectionReader s1(section(root, "stage1"), "stage1");
  s1.read("epochs", c.stage1.epochs);
  s1.read("lr_inversion", c.stage1.lr_inversion);
  s1.read("lr_prompts", c.stage1.lr_prompts);
  s1.read("lr_decay", c.stage1.lr_decay);
  s1.read("weight_decay", c.stage1.weight_decay);
  s1.finish();

  SectionReader s2(section(root, "stage2"), "stage2");
  s2.read("epochs", c.stage2.epochs);
  s2.read("warmup_epochs", c.stage2.warmup_epochs);
  s2.read("warmup_lr_start", c.stage2.warmup_lr_start);
  s2.read("peak_lr", c.stage2.peak_lr);
  s2.read("floor_lr", c.stage2.floor_lr);
  s2.read("weight_decay", c.stage2.weight_decay);
  s2.read("grad_clip", c.stage2.grad_clip);
  s2.read("prompt_audit_every", c.stage2.prompt_audit_every);
  s2.finish();

  SectionReader loss(section(root, "loss"), "loss");
  loss.read("lambda1", c.loss.lambda1);
  loss.read("lambda2", c.loss.lambda2);
  loss.read("temperature", c.loss.temperature);
  loss.read("learnable_temperature", c.loss.learnable_temperature);
  loss.read("margin", c.loss.triplet_margin);
  loss.finish();

  SectionReader ablation(section(root, "ablation"), "ablation");
  ablation.read("enable_trt", c.ablation.enable_trt);
  ablation.read("enable_hpl", c.ablation.enable_hpl);
  ablation.read("enable_cmpr", c.ablation.enable_cmpr);
  ablation.read("enable_tgps", c.ablation.enable_tgps);
  ablation.read("enable_vgps", c.ablation.enable_vgps);
  ablation.finish();

  SectionReader eval(section(root, "eval"), "eval");
  eval.read("task", c.eval.task);
  eval.read("batch_size", c.eval.batch_size);
  eval.finish();

  SectionReader output(section(root, "output"), "output");
  output.read("dir", c.output.dir);
  output.finish();

  c.model.dual_class_token = c.ablation.enable_trt;
  c.validate();
  return c;
}

// Parses a bare TOML value; anything unparseable is taken as a string.
toml::table parse_value(const std::string& text) {
  try {
    return toml::parse("v = " + text);
  } catch (const toml::parse_error&) {
    toml::table t;
    t.insert_or_assign("v", text);
    return t;
  }
}

void apply_overrides(toml::table& root, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, value] : overrides) {
    auto parsed = parse_value(value);
    auto& node = *parsed.get("v");
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      node.visit([&](auto&& v) { root.insert_or_assign(key, v); });
      continue;
    }
    const auto sec = key.substr(0, dot);
    const auto name = key.substr(dot + 1);
    if (root.get(sec) == nullptr) root.insert_or_assign(sec, toml::table{});
    auto* t = root.get(sec)->as_table();
    if (t == nullptr) throw ConfigError("config section '" + sec + "' must be a table");
    node.visit([&](auto&& v) { t->insert_or_assign(name, v); });
  }
}

toml::table json_to_toml(const nlohmann::json& j) {
  toml::table t;
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      t.insert_or_assign(key, json_to_toml(value));
    } else if (value.is_boolean()) {
      t.insert_or_assign(key, value.get<bool>());
    } else if (value.is_number_unsigned()) {
      t.insert_or_assign(key, static_cast<int64_t>(value.get<uint64_t>()));
    } else if (value.is_number_integer()) {
      t.insert_or_assign(key, value.get<int64_t>());
    } else if (value.is_number_float()) {
      t.insert_or_assign(key, value.get<double>());
    } else if (value.is_string()) {
      t.insert_or_assign(key, value.get<std::string>());
    } else {
      throw ConfigError("config snapshot key '" + key + "' has an unsupported type");
    }
  }
  return t;
}

}  // namespace

void RunConfig::validate() const {
  ModelConfig probe = model;
  probe.vocab_size = std::max<int64_t>(probe.vocab_size, kNumSpecialTokens + kTemplateWords);
  probe.num_identities = std::max<int64_t>(probe.num_identities, 1);
  probe.validate();
  data.batch.validate();
  synthetic_spec().validate();
  loss.validate();
  if (stage1.epochs < 0 || stage2.epochs < 1) {
    throw ConfigError("stage1.epochs must be >= 0 and stage2.epochs >= 1");
  }
  if (stage1.lr_inversion <= 0 || stage1.lr_prompts <= 0 || stage1.lr_decay <= 0) {
    throw ConfigError("stage1 learning rates and decay must be positive");
  }
  if (stage2.warmup_epochs < 0 || stage2.warmup_epochs >= stage2.epochs) {
    throw ConfigError("stage2.warmup_epochs must be in [0, epochs)");
  }
  if (stage2.warmup_lr_start <= 0 || stage2.peak_lr <= 0 || stage2.floor_lr <= 0) {
    throw ConfigError("stage2 learning rates must be positive");
  }
  if (stage2.grad_clip < 0) throw ConfigError("stage2.grad_clip must be non-negative");
  if (ablation.enable_cmpr && !ablation.enable_hpl) {
    throw ConfigError("ablation.enable_cmpr requires ablation.enable_hpl (CMPR needs the inversion networks)");
  }
  if (eval.task != "i2i" && eval.task != "t2i" && eval.task != "both") {
    throw ConfigError("eval.task must be one of i2i, t2i, both");
  }
  if (eval.batch_size < 1) throw ConfigError("eval.batch_size must be positive");
  if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

std::filesystem::path RunConfig::t2i_manifest_path() const {
  if (!data.t2i_manifest.empty()) return data.t2i_manifest;
  return output_dir() / "data" / "t2i" / "manifest.json";
}

std::filesystem::path RunConfig::i2i_manifest_path() const {
  if (!data.i2i_manifest.empty()) return data.i2i_manifest;
  return output_dir() / "data" / "i2i" / "manifest.json";
}

SyntheticSpec RunConfig::synthetic_spec() const {
  SyntheticSpec spec = data.synthetic;
  spec.image_height = model.image_height;
  spec.image_width = model.image_width;
  spec.seed = derive_seed(seed, "data");
  return spec;
}

nlohmann::json RunConfig::to_json() const {
  const auto& m = model;
  const auto& s = data.synthetic;
  return {
      {"seed", seed},
      {"model",
       {{"image_height", m.image_height}, {"image_width", m.image_width},
        {"patch_size", m.patch_size},     {"vis_width", m.vis_width},
        {"vis_layers", m.vis_layers},     {"vis_heads", m.vis_heads},
        {"txt_width", m.txt_width},       {"txt_layers", m.txt_layers},
        {"txt_heads", m.txt_heads},       {"joint_dim", m.joint_dim},
        {"max_text_len", m.max_text_len}, {"id_tokens", m.id_tokens},
        {"inst_tokens", m.inst_tokens},   {"inversion_layers", m.inversion_layers},
        {"mlp_ratio", m.mlp_ratio}}},
      {"data",
       {{"t2i_manifest", data.t2i_manifest},
        {"i2i_manifest", data.i2i_manifest},
        {"identities", s.n_identities},
        {"images_per_identity", s.images_per_identity},
        {"cameras", s.n_cameras},
        {"test_identities", s.test_identities},
        {"shared_identities", s.shared_identities},
        {"genders", s.genders},
        {"hair_colors", s.hair_colors},
        {"top_colors", s.top_colors},
        {"bottom_colors", s.bottom_colors},
        {"actions", s.actions},
        {"carried_objects", s.carried_objects},
        {"t2i_batch", data.batch.t2i_batch},
        {"i2i_batch", data.batch.i2i_batch},
        {"instances_per_identity", data.batch.instances_per_identity}}},
      {"stage1",
       {{"epochs", stage1.epochs},
        {"lr_inversion", stage1.lr_inversion},
        {"lr_prompts", stage1.lr_prompts},
        {"lr_decay", stage1.lr_decay},
        {"weight_decay", stage1.weight_decay}}},
      {"stage2",
       {{"epochs", stage2.epochs},
        {"warmup_epochs", stage2.warmup_epochs},
        {"warmup_lr_start", stage2.warmup_lr_start},
        {"peak_lr", stage2.peak_lr},
        {"floor_lr", stage2.floor_lr},
        {"weight_decay", stage2.weight_decay},
        {"grad_clip", stage2.grad_clip},
        {"prompt_audit_every", stage2.prompt_audit_every}}},
      {"loss",
       {{"lambda1", loss.lambda1},
        {"lambda2", loss.lambda2},
        {"temperature", loss.temperature},
        {"learnable_temperature", loss.learnable_temperature},
        {"margin", loss.triplet_margin}}},
      {"ablation",
       {{"enable_trt", ablation.enable_trt},
        {"enable_hpl", ablation.enable_hpl},
        {"enable_cmpr", ablation.enable_cmpr},
        {"enable_tgps", ablation.enable_tgps},
        {"enable_vgps", ablation.enable_vgps}}},
      {"eval", {{"task", eval.task}, {"batch_size", eval.batch_size}}},
      {"output", {{"dir", output.dir}}},
  };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) { return from_table(json_to_toml(j)); }

RunConfig RunConfig::from_toml_string(const std::string& text,
                                      const std::map<std::string, std::string>& overrides) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& ex) {
    std::ostringstream msg;
    msg << "invalid TOML at line " << ex.source().begin.line << ": " << ex.description();
    throw ConfigError(msg.str());
  }
  apply_overrides(root, overrides);
  return from_table(root);
}

RunConfig RunConfig::from_toml_file(const std::filesystem::path& path,
                                    const std::map<std::string, std::string>& overrides) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open config " + path.string());
  std::string text;
  char buf[4096];
  size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, n);
  std::fclose(f);
  return from_toml_string(text, overrides);
}

std::map<std::string, std::string> environment_overrides(char** envp) {
  static const std::set<std::string> kSections = {"model", "data",     "stage1", "stage2",
                                                  "loss",  "ablation", "eval",   "output"};
  std::map<std::string, std::string> out;
  if (envp == nullptr) return out;
  for (char** e = envp; *e != nullptr; ++e) {
    const std::string entry(*e);
    if (entry.rfind("HPL_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(4, eq - 4);
    for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const std::string value = entry.substr(eq + 1);
    if (name == "seed") {
      out["seed"] = value;
      continue;
    }
    const auto us = name.find('_');
    if (us == std::string::npos || kSections.count(name.substr(0, us)) == 0) {
      throw ConfigError("environment override HPL_" + entry.substr(4, eq - 4) +
                        " does not name a config section");
    }
    out[name.substr(0, us) + "." + name.substr(us + 1)] = value;
  }
  return out;
}

std::string model_config_hash(const ModelConfig& config) {
  nlohmann::json j = config;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace unireid
