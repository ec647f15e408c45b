#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unireid/config/run_config.h"
#include "unireid/data/synthetic.h"
#include "unireid/eval/retrieval.h"
#include "unireid/model.h"
#include "unireid/train/checkpoint.h"

namespace unireid {

using LogFn = std::function<void(const std::string&)>;

enum class StageSelection { kStage1, kStage2, kAll };

StageSelection parse_stage(const std::string& text);

// Run-directory layout under output.dir:
//   data/{t2i,i2i}/          generated synthetic datasets
//   stage1/checkpoint/       Stage I checkpoint, stage1/metrics.csv
//   stage2/checkpoint/       Stage II checkpoint (rewritten every epoch),
//                            stage2/metrics.csv
//   results.json, runs.csv   evaluation output
std::filesystem::path stage_dir(const RunConfig& config, int stage);
std::filesystem::path stage_checkpoint(const RunConfig& config, int stage);

// Writes the synthetic T2I and I2I datasets under `out_dir` (default
// <output.dir>/data).
SyntheticOutput generate_data(const RunConfig& config,
                              const std::filesystem::path& out_dir = {});

struct TrainOutcome {
  std::filesystem::path stage1;  // empty when Stage I did not run
  std::filesystem::path stage2;
};

// Runs the selected stages. Stage II starts from the Stage I checkpoint when
// prompts are enabled (ConfigError if it is missing). With `resume`, an
// unfinished checkpoint of a stage is continued instead of restarted.
TrainOutcome train_run(const RunConfig& config, StageSelection stages, const LogFn& log = {},
                       bool resume = false);

// Rebuilds the model stored in a checkpoint.
UnifiedReidModel load_model(const Checkpoint& checkpoint);

// Evaluates a checkpoint (default: the Stage II checkpoint) on the test
// splits; task is i2i, t2i or both. Writes <output.dir>/results.json and
// appends to <output.dir>/runs.csv.
std::vector<RetrievalResult> evaluate_run(const RunConfig& config,
                                          const std::filesystem::path& checkpoint = {},
                                          const std::string& task = "both",
                                          const LogFn& log = {});

struct AblationRow {
  std::string name;
  bool enable_trt = false;
  bool enable_hpl = false;
  bool enable_cmpr = false;
};

// The four component rows: baseline, +TRT, +TRT+HPL, +TRT+HPL+CMPR.
const std::vector<AblationRow>& ablation_grid();

RunConfig ablation_config(const RunConfig& base, const AblationRow& row);

// Generates data once, then trains and evaluates every grid row under
// <output.dir>/ablation/<row> and writes the report into output.dir.
std::vector<std::filesystem::path> run_ablation(const RunConfig& base, const LogFn& log = {});

// ablation.csv columns, in order.
const std::vector<std::string>& report_columns();

// Reads results.json and the checkpoint histories of each run directory and
// writes ablation.csv, ablation.txt and curves.csv into out_dir. IoError
// listing every run directory that is missing or lacks results.
void write_report(const std::vector<std::filesystem::path>& run_dirs,
                  const std::filesystem::path& out_dir);

}  // namespace unireid
