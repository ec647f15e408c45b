// unireid: generate synthetic data, train, evaluate, run the component
// ablation grid and build reports from one TOML config.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unireid/errors.h"
#include "unireid/pipeline.h"

extern char** environ;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "TOML run config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "root seed (overrides the config)");
  cmd->add_option("--out", opts.out, "output directory (overrides [output] dir)");
}

unireid::RunConfig load_config(const CommonOptions& opts,
                               std::map<std::string, std::string> extra = {}) {
  auto overrides = unireid::environment_overrides(environ);
  if (opts.seed) overrides["seed"] = std::to_string(*opts.seed);
  if (!opts.out.empty()) overrides["output.dir"] = "\"" + opts.out + "\"";
  for (auto& [k, v] : extra) overrides[k] = v;
  if (opts.config.empty()) return unireid::RunConfig::from_toml_string("", overrides);
  return unireid::RunConfig::from_toml_file(opts.config, overrides);
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified image/text person re-identification"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, eval_opts, ablate_opts;
  std::optional<int64_t> identities, images;
  std::string stage = "all";
  bool resume = false;
  std::string task;
  std::string checkpoint;
  std::vector<std::string> run_dirs;
  std::string report_out;

  auto* gen = app.add_subcommand("generate", "write the synthetic T2I and I2I datasets");
  add_common(gen, gen_opts);
  gen->add_option("--identities", identities, "identities per dataset");
  gen->add_option("--images", images, "images per identity");

  auto* train = app.add_subcommand("train", "run Stage I and/or Stage II");
  add_common(train, train_opts);
  train->add_option("--stage", stage, "1, 2 or all")->check(CLI::IsMember({"1", "2", "all"}));
  train->add_flag("--resume", resume, "continue unfinished stage checkpoints");

  auto* eval = app.add_subcommand("evaluate", "Rank-k and mAP on the test splits");
  add_common(eval, eval_opts);
  eval->add_option("--task", task, "i2i, t2i or both")->check(CLI::IsMember({"i2i", "t2i", "both"}));
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory (default: Stage II)");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate the 4-row component grid");
  add_common(ablate, ablate_opts);

  auto* report = app.add_subcommand("report", "ablation table and curves from run directories");
  report->add_option("runs", run_dirs, "run directories")->required();
  report->add_option("--out", report_out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << std::endl;
    return 64;
  }

  try {
    if (gen->parsed()) {
      std::map<std::string, std::string> extra;
      if (identities) {
        // Shrink the test and shared counts so a smaller identity count stays valid.
        const auto base = load_config(gen_opts).data.synthetic;
        const int64_t test = std::min(base.test_identities, *identities / 2);
        const int64_t shared = std::min(base.shared_identities, *identities - test);
        extra["data.identities"] = std::to_string(*identities);
        extra["data.test_identities"] = std::to_string(test);
        extra["data.shared_identities"] = std::to_string(shared);
      }
      if (images) extra["data.images_per_identity"] = std::to_string(*images);
      const auto cfg = load_config(gen_opts, extra);
      const auto out = unireid::generate_data(cfg);
      std::cout << out.t2i_manifest.string() << '\n' << out.i2i_manifest.string() << std::endl;
    } else if (train->parsed()) {
      const auto cfg = load_config(train_opts);
      const auto out = unireid::train_run(cfg, unireid::parse_stage(stage), log_line, resume);
      if (!out.stage1.empty()) std::cout << out.stage1.string() << '\n';
      if (!out.stage2.empty()) std::cout << out.stage2.string() << '\n';
    } else if (eval->parsed()) {
      const auto cfg = load_config(eval_opts);
      const auto results =
          unireid::evaluate_run(cfg, checkpoint, task.empty() ? cfg.eval.task : task, log_line);
      nlohmann::json doc = nlohmann::json::array();
      for (const auto& r : results) doc.push_back(r.to_json());
      std::cout << doc.dump(2) << std::endl;
    } else if (ablate->parsed()) {
      const auto cfg = load_config(ablate_opts);
      unireid::run_ablation(cfg, log_line);
      std::cout << (cfg.output_dir() / "ablation.txt").string() << std::endl;
    } else if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      unireid::write_report(dirs, report_out);
      std::cout << (std::filesystem::path(report_out) / "ablation.csv").string() << std::endl;
    }
  } catch (const unireid::Error& e) {
    std::string msg = e.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "error: " << unireid::error_kind_name(e.kind()) << ": " << msg << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "error: internal: " << msg << std::endl;
    return 3;
  }
  return 0;
}
