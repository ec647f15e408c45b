#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "unireid/backbone/model_config.h"

namespace unireid {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

// A checkpoint directory holds metadata.json, tensors.bin (little-endian
// float32 blobs back to back) and blobs.json (name, shape and byte offset of
// every blob).
struct CheckpointMeta {
  nlohmann::json config;        // run config snapshot
  nlohmann::json model_config;  // architecture incl. vocab size and N_id
  std::string config_hash;
  int stage = 0;
  int64_t epoch = 0;          // completed epochs
  int64_t step = 0;           // global optimizer steps
  int64_t step_in_epoch = 0;
  nlohmann::json sampler;
  nlohmann::json history;
  nlohmann::json vocab;
  nlohmann::json identities;

  nlohmann::json to_json() const;
  static CheckpointMeta from_json(const nlohmann::json& j);
};

struct Checkpoint {
  CheckpointMeta meta;
  NamedTensors tensors;

  // Tensor by exact name; nullptr when absent.
  const torch::Tensor* find(const std::string& name) const;
  ModelConfig model_config() const;
};

void write_tensor_blobs(const std::filesystem::path& dir, const NamedTensors& tensors);
NamedTensors read_tensor_blobs(const std::filesystem::path& dir);

// Writes into a sibling temporary directory and renames it into place.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);

// IoError when the directory or a file is missing or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// ConfigError when the checkpoint architecture differs from `expected`,
// unless allow_mismatch is set.
void check_config_hash(const Checkpoint& checkpoint, const ModelConfig& expected,
                       bool allow_mismatch);

// Parameters and buffers of a module under "model/<name>".
NamedTensors module_tensors(const torch::nn::Module& module);

// Copies "model/<name>" tensors into the module. ConfigError on a missing
// tensor or a shape mismatch.
void load_module_tensors(torch::nn::Module& module, const Checkpoint& checkpoint);

}  // namespace unireid
