#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "unireid/backbone/model_config.h"
#include "unireid/data/sampler.h"
#include "unireid/data/synthetic.h"
#include "unireid/objectives/losses.h"

namespace unireid {

struct DataConfig {
  // Empty paths mean <output.dir>/data/{t2i,i2i}/manifest.json.
  std::string t2i_manifest;
  std::string i2i_manifest;
  SyntheticSpec synthetic;  // image size and seed come from [model] / root seed
  BatchConfig batch;
};

struct Stage1Config {
  int64_t epochs = 10;
  double lr_inversion = 5e-5;
  double lr_prompts = 0.02;
  double lr_decay = 0.8;  // per epoch
  double weight_decay = 1e-4;
};

struct Stage2Config {
  int64_t epochs = 60;
  int64_t warmup_epochs = 5;
  double warmup_lr_start = 1e-6;
  double peak_lr = 1e-5;
  double floor_lr = 1e-7;
  double weight_decay = 1e-4;
  double grad_clip = 0.0;  // global norm; 0 disables
  int64_t prompt_audit_every = 0;  // steps; 0 disables
};

struct AblationConfig {
  bool enable_trt = true;
  bool enable_hpl = true;
  bool enable_cmpr = true;
  bool enable_tgps = true;
  bool enable_vgps = true;
};

struct EvalConfig {
  std::string task = "both";  // i2i | t2i | both
  int64_t batch_size = 128;
};

struct OutputConfig {
  std::string dir = "runs/default";
};

// Everything a run needs, loaded from one TOML document with sections
// [model] [data] [stage1] [stage2] [loss] [ablation] [eval] [output] and a
// top-level seed. Unknown keys are errors.
struct RunConfig {
  uint64_t seed = 0;
  ModelConfig model;
  DataConfig data;
  Stage1Config stage1;
  Stage2Config stage2;
  LossWeights loss;
  AblationConfig ablation;
  EvalConfig eval;
  OutputConfig output;

  // ConfigError on invalid combinations (e.g. CMPR without HPL).
  void validate() const;

  std::filesystem::path output_dir() const { return output.dir; }
  std::filesystem::path t2i_manifest_path() const;
  std::filesystem::path i2i_manifest_path() const;
  // Synthetic spec with the image size and seed filled in.
  SyntheticSpec synthetic_spec() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // Overrides are "section.key" (or "seed") -> literal TOML value text.
  static RunConfig from_toml_string(const std::string& text,
                                    const std::map<std::string, std::string>& overrides = {});
  static RunConfig from_toml_file(const std::filesystem::path& path,
                                  const std::map<std::string, std::string>& overrides = {});
};

// HPL_<SECTION>_<KEY>=value variables (HPL_SEED for the root seed) mapped
// to override keys.
std::map<std::string, std::string> environment_overrides(char** envp);

// Stable hash of the architecture fields, used to match checkpoints.
std::string model_config_hash(const ModelConfig& config);

}  // namespace unireid
