#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "unireid/config/run_config.h"
#include "unireid/data/dataset.h"
#include "unireid/data/sampler.h"
#include "unireid/model.h"
#include "unireid/train/checkpoint.h"
#include "unireid/train/schedule.h"

namespace unireid {

struct StepResult {
  int64_t epoch = 0;
  int64_t step = 0;  // global step index of this update
  double lr = 0.0;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> terms;
};

// Loss-term columns of the per-epoch metrics CSV for a stage.
const std::vector<std::string>& stage_loss_terms(int stage);

// Parameter-name prefixes trainable in a stage (1 or 2).
std::vector<std::string> trainable_prefixes(int stage, const RunConfig& config);

// Builds a freshly initialized model for the data, seeded from the root
// seed's "init" stream.
UnifiedReidModel build_model(const RunConfig& config, const Vocabulary& vocab,
                             int64_t num_identities);

// Runs one stage: freezes everything outside the stage's trainable set,
// drives the joint sampler, applies the per-epoch learning rate and audits
// gradients after every backward pass.
class StageTrainer {
 public:
  StageTrainer(UnifiedReidModel model, const RunConfig& config, const TrainingData& data,
               int stage);

  int stage() const { return stage_; }
  int64_t epochs() const { return epochs_; }
  int64_t epoch() const { return epoch_; }
  int64_t step_in_epoch() const { return step_in_epoch_; }
  int64_t global_step() const { return global_step_; }
  int64_t steps_per_epoch() const { return sampler_.steps_per_epoch(); }
  bool finished() const { return epoch_ >= epochs_; }
  double lr() const;

  StepResult step();
  // Runs the remaining steps of the current epoch and records its metrics.
  nlohmann::json run_epoch();

  UnifiedReidModel& model() { return model_; }
  const nlohmann::json& history() const { return history_; }
  const std::vector<std::string>& trainable() const { return trainable_; }
  // Names of parameters that received a nonzero gradient in the last step.
  const std::set<std::string>& last_gradient_set() const { return last_grad_set_; }
  // Largest deviation seen by the identity-prompt recompute audit.
  double prompt_audit_max_diff() const { return audit_max_diff_; }
  int64_t prompt_audits() const { return audits_; }
  const std::vector<std::string>& warnings() const { return sampler_.warnings(); }

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& dir) const;
  // Resumes optimizer, sampler and counters from a checkpoint of this stage
  // (model tensors included).
  void restore(const Checkpoint& checkpoint, bool allow_mismatch = false);

  void write_metrics_csv(const std::filesystem::path& path) const;

 private:
  torch::Tensor stage1_loss(const JointBatch& batch, std::vector<std::pair<std::string, double>>& terms);
  torch::Tensor stage2_loss(const JointBatch& batch, std::vector<std::pair<std::string, double>>& terms);
  void apply_lr();
  void audit_gradients();
  void audit_prompt_bank();

  UnifiedReidModel model_;
  RunConfig config_;
  const TrainingData* data_;
  int stage_;
  int64_t epochs_;
  JointBatchSampler sampler_;
  std::vector<std::string> trainable_;
  std::vector<LrSchedule> group_schedules_;
  std::unique_ptr<torch::optim::AdamW> optimizer_;
  std::vector<std::pair<std::string, torch::Tensor>> optim_params_;
  torch::Tensor bank_;  // Stage II identity-prompt embeddings
  int64_t epoch_ = 0;
  int64_t step_in_epoch_ = 0;
  int64_t global_step_ = 0;
  nlohmann::json history_;
  std::vector<std::vector<std::pair<std::string, double>>> epoch_terms_;
  double epoch_wall_ = 0.0;
  std::set<std::string> last_grad_set_;
  double audit_max_diff_ = 0.0;
  int64_t audits_ = 0;
};

}  // namespace unireid
