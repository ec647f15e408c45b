#include "unireid/pipeline.h"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "unireid/data/dataset.h"
#include "unireid/errors.h"
#include "unireid/train/trainer.h"

namespace unireid {
namespace fs = std::filesystem;

namespace {

void emit(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::string format(const char* fmt, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("malformed " + path.string() + ": " + ex.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

ModelConfig expected_model_config(const RunConfig& config, int64_t vocab_size,
                                  int64_t num_identities) {
  ModelConfig m = config.model;
  m.vocab_size = vocab_size;
  m.num_identities = num_identities;
  m.dual_class_token = config.ablation.enable_trt;
  return m;
}

void run_stage(StageTrainer& trainer, const RunConfig& config, bool resume, const LogFn& log) {
  const int stage = trainer.stage();
  const auto dir = stage_dir(config, stage);
  const auto ckpt_dir = stage_checkpoint(config, stage);
  fs::create_directories(dir);
  if (resume && fs::exists(ckpt_dir / "metadata.json")) {
    const auto ckpt = load_checkpoint(ckpt_dir);
    if (ckpt.meta.stage == stage && ckpt.meta.epoch < trainer.epochs()) {
      trainer.restore(ckpt);
      emit(log, "stage " + std::to_string(stage) + ": resuming at epoch " +
                    std::to_string(ckpt.meta.epoch) + ", step " + std::to_string(ckpt.meta.step));
    }
  }
  for (const auto& w : trainer.warnings()) emit(log, "warning: " + w);
  while (!trainer.finished()) {
    const auto rec = trainer.run_epoch();
    trainer.save(ckpt_dir);
    trainer.write_metrics_csv(dir / "metrics.csv");
    std::ostringstream msg;
    msg << "stage " << stage << " epoch " << rec["epoch"].get<int64_t>() + 1 << "/"
        << trainer.epochs() << " loss " << std::setprecision(5)
        << rec["losses"]["total"].get<double>() << " lr " << rec["lr"].get<double>();
    emit(log, msg.str());
  }
  if (!fs::exists(ckpt_dir / "metadata.json")) {
    trainer.save(ckpt_dir);
    trainer.write_metrics_csv(dir / "metrics.csv");
  }
}

}  // namespace

StageSelection parse_stage(const std::string& text) {
  if (text == "1") return StageSelection::kStage1;
  if (text == "2") return StageSelection::kStage2;
  if (text == "all") return StageSelection::kAll;
  throw ConfigError("stage must be 1, 2 or all, got '" + text + "'");
}

fs::path stage_dir(const RunConfig& config, int stage) {
  return config.output_dir() / ("stage" + std::to_string(stage));
}

fs::path stage_checkpoint(const RunConfig& config, int stage) {
  return stage_dir(config, stage) / "checkpoint";
}

SyntheticOutput generate_data(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  return generate_synthetic(config.synthetic_spec(),
                            out_dir.empty() ? config.output_dir() / "data" : out_dir);
}

UnifiedReidModel load_model(const Checkpoint& checkpoint) {
  const auto mc = checkpoint.model_config();
  const auto vocab = Vocabulary::from_json(checkpoint.meta.vocab);
  UnifiedReidModel model(mc, vocab.prompt_template(), 0.07);
  load_module_tensors(*model, checkpoint);
  return model;
}

TrainOutcome train_run(const RunConfig& config, StageSelection stages, const LogFn& log,
                       bool resume) {
  config.validate();
  const bool hpl = config.ablation.enable_hpl;
  if (stages == StageSelection::kStage1 && !hpl) {
    throw ConfigError("stage 1 trains the prompts and is skipped when ablation.enable_hpl is false");
  }
  const bool run1 = stages != StageSelection::kStage2 && hpl;
  const bool run2 = stages != StageSelection::kStage1;
  const auto max_len = config.model.max_text_len;

  TrainOutcome out;
  std::optional<TrainingData> data;
  UnifiedReidModel model{nullptr};

  if (run1) {
    data = load_training_data(config.t2i_manifest_path(), config.i2i_manifest_path(), max_len);
    model = build_model(config, data->vocab, data->identities.num_identities);
    StageTrainer trainer(model, config, *data, 1);
    run_stage(trainer, config, resume, log);
    out.stage1 = stage_checkpoint(config, 1);
  }
  if (!run2) return out;

  if (hpl && !run1) {
    const auto s1_dir = stage_checkpoint(config, 1);
    if (!fs::exists(s1_dir / "metadata.json")) {
      throw ConfigError("stage 2 needs the Stage-I checkpoint at " + s1_dir.string() +
                        "; run stage 1 first");
    }
    const auto s1 = load_checkpoint(s1_dir);
    if (s1.meta.stage != 1) throw ConfigError(s1_dir.string() + " is not a Stage-I checkpoint");
    const auto vocab = Vocabulary::from_json(s1.meta.vocab);
    data = load_training_data(config.t2i_manifest_path(), config.i2i_manifest_path(), max_len,
                              &vocab);
    check_config_hash(
        s1, expected_model_config(config, vocab.size(), data->identities.num_identities), false);
    model = load_model(s1);
  } else if (!hpl) {
    data = load_training_data(config.t2i_manifest_path(), config.i2i_manifest_path(), max_len);
    model = build_model(config, data->vocab, data->identities.num_identities);
  }
  StageTrainer trainer(model, config, *data, 2);
  run_stage(trainer, config, resume, log);
  out.stage2 = stage_checkpoint(config, 2);
  return out;
}

std::vector<RetrievalResult> evaluate_run(const RunConfig& config, const fs::path& checkpoint,
                                          const std::string& task, const LogFn& log) {
  if (task != "i2i" && task != "t2i" && task != "both") {
    throw ConfigError("task must be i2i, t2i or both, got '" + task + "'");
  }
  const auto ckpt_dir = checkpoint.empty() ? stage_checkpoint(config, 2) : checkpoint;
  const auto ckpt = load_checkpoint(ckpt_dir);
  auto model = load_model(ckpt);
  const auto vocab = Vocabulary::from_json(ckpt.meta.vocab);
  const auto data = load_training_data(config.t2i_manifest_path(), config.i2i_manifest_path(),
                                       model->config().max_text_len, &vocab);
  const auto bs = config.eval.batch_size;

  std::vector<RetrievalResult> results;
  if (task != "i2i") results.push_back(evaluate_t2i(model, data.t2i_gallery, bs));
  if (task != "t2i") results.push_back(evaluate_i2i(model, data.i2i_query, data.i2i_gallery, bs));
  for (const auto& r : results) {
    emit(log, r.task + ": " + format("Rank-1 %.4f mAP %.4f", r.rank1, r.mAP));
  }

  nlohmann::json doc = {{"checkpoint", ckpt_dir.string()},
                        {"config", ckpt.meta.config},
                        {"results", nlohmann::json::array()}};
  for (const auto& r : results) doc["results"].push_back(r.to_json());
  fs::create_directories(config.output_dir());
  write_text(config.output_dir() / "results.json", doc.dump(2) + "\n");
  append_runs_csv(config.output_dir() / "runs.csv", config.output_dir().filename().string(),
                  results);
  return results;
}

const std::vector<AblationRow>& ablation_grid() {
  static const std::vector<AblationRow> rows = {
      {"baseline", false, false, false},
      {"trt", true, false, false},
      {"trt_hpl", true, true, false},
      {"trt_hpl_cmpr", true, true, true},
  };
  return rows;
}

RunConfig ablation_config(const RunConfig& base, const AblationRow& row) {
  RunConfig c = base;
  c.ablation.enable_trt = row.enable_trt;
  c.ablation.enable_hpl = row.enable_hpl;
  c.ablation.enable_cmpr = row.enable_cmpr;
  c.model.dual_class_token = row.enable_trt;
  c.data.t2i_manifest = base.t2i_manifest_path().string();
  c.data.i2i_manifest = base.i2i_manifest_path().string();
  c.output.dir = (base.output_dir() / "ablation" / row.name).string();
  c.validate();
  return c;
}

std::vector<fs::path> run_ablation(const RunConfig& base, const LogFn& log) {
  base.validate();
  if (!fs::exists(base.t2i_manifest_path()) || !fs::exists(base.i2i_manifest_path())) {
    if (!base.data.t2i_manifest.empty() || !base.data.i2i_manifest.empty()) {
      throw IoError("ablation manifests not found: " + base.t2i_manifest_path().string() +
                    ", " + base.i2i_manifest_path().string());
    }
    emit(log, "generating synthetic data under " + (base.output_dir() / "data").string());
    generate_data(base);
  }
  std::vector<fs::path> dirs;
  for (const auto& row : ablation_grid()) {
    const auto cfg = ablation_config(base, row);
    emit(log, "ablation row " + row.name);
    train_run(cfg, StageSelection::kAll, log);
    evaluate_run(cfg, {}, "both", log);
    dirs.push_back(cfg.output_dir());
  }
  write_report(dirs, base.output_dir());
  return dirs;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"run",       "enable_trt", "enable_hpl",
                                                "enable_cmpr", "t2i_rank1", "t2i_mAP",
                                                "i2i_rank1", "i2i_mAP"};
  return cols;
}

void write_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  std::vector<std::string> missing;
  for (const auto& d : run_dirs) {
    if (!fs::is_directory(d) || !fs::exists(d / "results.json")) missing.push_back(d.string());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IoError("missing run directories or results: " + list);
  }
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");

  struct Row {
    std::string run;
    bool trt, hpl, cmpr;
    std::optional<double> t2i_r1, t2i_map, i2i_r1, i2i_map;
  };
  std::vector<Row> rows;
  std::ostringstream curves;
  curves << "run,stage,epoch,metric,value\n" << std::setprecision(10);
  for (const auto& d : run_dirs) {
    const auto doc = read_json(d / "results.json");
    const auto cfg = RunConfig::from_json(doc.at("config"));
    Row row{d.filename().string(), cfg.ablation.enable_trt, cfg.ablation.enable_hpl,
            cfg.ablation.enable_cmpr, {}, {}, {}, {}};
    for (const auto& r : doc.at("results")) {
      if (r.at("task") == "t2i") {
        row.t2i_r1 = r.at("rank1").get<double>();
        row.t2i_map = r.at("mAP").get<double>();
      } else {
        row.i2i_r1 = r.at("rank1").get<double>();
        row.i2i_map = r.at("mAP").get<double>();
      }
    }
    rows.push_back(row);
    for (int stage : {1, 2}) {
      const auto meta = d / ("stage" + std::to_string(stage)) / "checkpoint" / "metadata.json";
      if (!fs::exists(meta)) continue;
      const auto history = read_json(meta).at("history");
      for (const auto& rec : history.at("epochs")) {
        const auto epoch = rec.at("epoch").get<int64_t>();
        for (const auto& [k, v] : rec.at("losses").items()) {
          curves << row.run << ',' << stage << ',' << epoch << ',' << k << ',' << v.get<double>()
                 << '\n';
        }
        curves << row.run << ',' << stage << ',' << epoch << ",lr," << rec.at("lr").get<double>()
               << '\n';
      }
    }
  }

  auto cell = [](const std::optional<double>& v, double scale, int precision) {
    if (!v) return std::string();
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << *v * scale;
    return s.str();
  };
  std::ostringstream csv;
  for (size_t i = 0; i < report_columns().size(); ++i) {
    csv << (i ? "," : "") << report_columns()[i];
  }
  csv << '\n';
  std::ostringstream txt;
  txt << std::left << std::setw(16) << "run" << std::setw(6) << "TRT" << std::setw(6) << "HPL"
      << std::setw(6) << "CMPR" << std::right << std::setw(9) << "T2I R1" << std::setw(9)
      << "T2I mAP" << std::setw(9) << "I2I R1" << std::setw(9) << "I2I mAP" << '\n';
  for (const auto& r : rows) {
    csv << r.run << ',' << r.trt << ',' << r.hpl << ',' << r.cmpr << ',' << cell(r.t2i_r1, 1, 6)
        << ',' << cell(r.t2i_map, 1, 6) << ',' << cell(r.i2i_r1, 1, 6) << ','
        << cell(r.i2i_map, 1, 6) << '\n';
    auto mark = [](bool on) { return on ? "yes" : "-"; };
    txt << std::left << std::setw(16) << r.run << std::setw(6) << mark(r.trt) << std::setw(6)
        << mark(r.hpl) << std::setw(6) << mark(r.cmpr) << std::right << std::setw(9)
        << cell(r.t2i_r1, 100, 2) << std::setw(9) << cell(r.t2i_map, 100, 2) << std::setw(9)
        << cell(r.i2i_r1, 100, 2) << std::setw(9) << cell(r.i2i_map, 100, 2) << '\n';
  }
  fs::create_directories(out_dir);
  write_text(out_dir / "ablation.csv", csv.str());
  write_text(out_dir / "ablation.txt", txt.str());
  write_text(out_dir / "curves.csv", curves.str());
}

}  // namespace unireid
