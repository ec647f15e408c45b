#include "unireid/train/trainer.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "unireid/errors.h"
#include "unireid/objectives/losses.h"
#include "unireid/random.h"

namespace unireid {
namespace {

bool decays(const std::string& name, const torch::Tensor& p) {
  if (p.dim() < 2) return false;
  for (const char* key : {"id_prompts", "queries", "class_", "pos_", "positional"}) {
    if (name.find(key) != std::string::npos) return false;
  }
  return true;
}

torch::optim::AdamWOptions& group_options(torch::optim::OptimizerParamGroup& group) {
  return static_cast<torch::optim::AdamWOptions&>(group.options());
}

double scalar(const torch::Tensor& t) { return t.item<double>(); }

}  // namespace

const std::vector<std::string>& stage_loss_terms(int stage) {
  static const std::vector<std::string> kStage1 = {"t2i", "i2t", "ic"};
  static const std::vector<std::string> kStage2 = {"sdm",  "id_t2i", "triplet",
                                                   "id_i2i", "cic",  "ilpa",
                                                   "tgps", "vgps",   "cmpr"};
  return stage == 1 ? kStage1 : kStage2;
}

std::vector<std::string> trainable_prefixes(int stage, const RunConfig& config) {
  if (stage == 1) return {"id_prompts.", "inv_visual.", "inv_textual."};
  std::vector<std::string> out = {"visual.", "text.", "t2i_classifier.", "i2i_neck.",
                                  "i2i_classifier."};
  if (config.loss.learnable_temperature) out.emplace_back("log_temperature");
  return out;
}

UnifiedReidModel build_model(const RunConfig& config, const Vocabulary& vocab,
                             int64_t num_identities) {
  ModelConfig m = config.model;
  m.vocab_size = vocab.size();
  m.num_identities = num_identities;
  m.dual_class_token = config.ablation.enable_trt;
  torch::manual_seed(derive_seed(config.seed, "init"));
  return UnifiedReidModel(m, vocab.prompt_template(), config.loss.temperature);
}

StageTrainer::StageTrainer(UnifiedReidModel model, const RunConfig& config,
                           const TrainingData& data, int stage)
    : model_(std::move(model)),
      config_(config),
      data_(&data),
      stage_(stage),
      epochs_(stage == 1 ? config.stage1.epochs : config.stage2.epochs),
      sampler_(data.t2i_train, data.i2i_train, config.data.batch,
               derive_seed(config.seed, stage == 1 ? "sampler/stage1" : "sampler/stage2")) {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  if (stage == 1 && !config.ablation.enable_hpl) {
    throw ConfigError("stage 1 trains the prompts and is skipped when enable_hpl is false");
  }
  if (model_->config().num_identities != data.identities.num_identities) {
    throw ConfigError("model has " + std::to_string(model_->config().num_identities) +
                      " identities, the data has " +
                      std::to_string(data.identities.num_identities));
  }

  trainable_ = parameters_with_prefix(*model_, trainable_prefixes(stage, config));
  const std::set<std::string> trainable(trainable_.begin(), trainable_.end());
  std::vector<torch::Tensor> decay, no_decay, prompts;
  for (auto& item : model_->named_parameters()) {
    item.value().mutable_grad() = torch::Tensor();
    const bool on = trainable.count(item.key()) > 0;
    item.value().set_requires_grad(on);
    if (!on) continue;
    optim_params_.emplace_back(item.key(), item.value());
    if (stage == 1 && item.key().rfind("id_prompts.", 0) == 0) {
      prompts.push_back(item.value());
    } else if (decays(item.key(), item.value())) {
      decay.push_back(item.value());
    } else {
      no_decay.push_back(item.value());
    }
  }

  std::vector<torch::optim::OptimizerParamGroup> groups;
  auto add_group = [&](std::vector<torch::Tensor>& params, double wd, const LrSchedule& s) {
    if (params.empty()) return;
    auto opts = std::make_unique<torch::optim::AdamWOptions>(lr_at(0, s));
    opts->betas({0.9, 0.999}).eps(1e-8).weight_decay(wd).amsgrad(false);
    groups.emplace_back(params, std::move(opts));
    group_schedules_.push_back(s);
  };
  if (stage == 1) {
    const auto inv = LrSchedule::exponential(config.stage1.lr_inversion, config.stage1.lr_decay);
    const auto pr = LrSchedule::exponential(config.stage1.lr_prompts, config.stage1.lr_decay);
    add_group(decay, config.stage1.weight_decay, inv);
    add_group(no_decay, 0.0, inv);
    add_group(prompts, 0.0, pr);
  } else {
    const auto& s2 = config.stage2;
    const auto s = LrSchedule::warmup_cosine(s2.warmup_lr_start, s2.peak_lr, s2.floor_lr,
                                             s2.warmup_epochs, s2.epochs);
    add_group(decay, s2.weight_decay, s);
    add_group(no_decay, 0.0, s);
  }
  if (groups.empty()) throw ConfigError("stage " + std::to_string(stage) + " has nothing to train");
  optimizer_ = std::make_unique<torch::optim::AdamW>(std::move(groups));

  if (stage == 2 && config.ablation.enable_hpl) {
    torch::NoGradGuard no_grad;
    bank_ = model_->all_identity_prompt_embeddings().detach();
  }
  history_ = {{"epochs", nlohmann::json::array()}, {"steps", nlohmann::json::array()}};
}

double StageTrainer::lr() const {
  return lr_at(static_cast<double>(std::min(epoch_, epochs_ - 1)), group_schedules_.front());
}

void StageTrainer::apply_lr() {
  auto& groups = optimizer_->param_groups();
  for (size_t i = 0; i < groups.size(); ++i) {
    group_options(groups[i]).lr(lr_at(static_cast<double>(epoch_), group_schedules_[i]));
  }
}

torch::Tensor StageTrainer::stage1_loss(const JointBatch& batch,
                                        std::vector<std::pair<std::string, double>>& terms) {
  auto& m = *model_;
  const auto& views = batch.views;
  VisualFeatures vf;
  TextFeatures tf;
  {
    torch::NoGradGuard no_grad;
    vf = m.visual->forward(batch.pixels);
    tf = m.text->forward(batch.token_ids);
  }
  const auto labels_t2i = batch.labels.index_select(0, views.t2i_index);
  const auto pv = invert_visual(m.inv_visual, vf).tokens;
  const auto pt = invert_textual(m.inv_textual, tf).tokens;
  const auto vis_emb = m.instance_prompt_embeddings(batch.labels, pv);
  const auto txt_emb = m.instance_prompt_embeddings(labels_t2i, pt);

  Stage1Parts parts;
  parts.ic = inversion_consistency(vis_emb, vf.cls_t2i, txt_emb, tf.eos, views);
  const auto refs = m.identity_prompt_embeddings(batch.labels);
  const auto pc = prompt_contrastive(vf.cls_t2i, refs, m.temperature());
  parts.t2i = pc.t2i;
  parts.i2t = pc.i2t;
  terms = {{"t2i", scalar(parts.t2i)}, {"i2t", scalar(parts.i2t)}, {"ic", scalar(parts.ic)}};
  return stage1_objective(parts);
}

torch::Tensor StageTrainer::stage2_loss(const JointBatch& batch,
                                        std::vector<std::pair<std::string, double>>& terms) {
  auto& m = *model_;
  const auto& views = batch.views;
  const auto& ab = config_.ablation;
  const auto vf = m.visual->forward(batch.pixels);
  const auto tf = m.text->forward(batch.token_ids);
  const auto temperature = m.temperature();

  const auto t2i_index = views.t2i_index;
  const auto labels_t2i = batch.labels.index_select(0, t2i_index);

  BaseHeads heads;
  heads.t2i_classifier = [&](const torch::Tensor& x) { return m.t2i_classifier(x); };
  heads.i2i_classifier = [&](const torch::Tensor& x) { return m.i2i_classifier(m.i2i_neck(x)); };
  auto parts = base_losses(vf.cls_t2i, vf.cls_i2i, tf.eos, views, heads, temperature,
                           config_.loss.triplet_margin);
  terms = {{"sdm", scalar(parts.sdm)},
           {"id_t2i", scalar(parts.id_t2i)},
           {"triplet", scalar(parts.triplet)},
           {"id_i2i", scalar(parts.id_i2i)}};

  if (ab.enable_hpl) {
    parts.cic = cic_loss(vf.cls_i2i, bank_, batch.labels, temperature,
                         m.config().num_identities);
    terms.emplace_back("cic", scalar(parts.cic));

    const auto pt = invert_textual(m.inv_textual, tf).tokens;
    VisualFeatures t2i_feats;
    t2i_feats.tokens = vf.tokens.index_select(0, t2i_index);
    const auto pv = invert_visual(m.inv_visual, t2i_feats).tokens;

    const bool need_ilpa = ab.enable_tgps || ab.enable_vgps;
    if (need_ilpa) {
      const auto txt_emb = m.instance_prompt_embeddings(labels_t2i, pt);
      const auto vis_emb = m.instance_prompt_embeddings(labels_t2i, pv);
      const auto ilpa = ilpa_loss(txt_emb, vf.cls_t2i, vis_emb, tf.eos, views);
      if (ab.enable_tgps && ab.enable_vgps) {
        parts.ilpa = ilpa.total;
      } else {
        parts.ilpa = ab.enable_tgps ? ilpa.tgps : ilpa.vgps;
      }
      terms.emplace_back("ilpa", scalar(parts.ilpa));
      if (ab.enable_tgps) terms.emplace_back("tgps", scalar(ilpa.tgps));
      if (ab.enable_vgps) terms.emplace_back("vgps", scalar(ilpa.vgps));
    }
    if (ab.enable_cmpr) {
      parts.cmpr = cmpr_loss(pt, pv, views);
      terms.emplace_back("cmpr", scalar(parts.cmpr));
    }
  }
  return stage2_objective(parts, config_.loss);
}

void StageTrainer::audit_gradients() {
  last_grad_set_.clear();
  for (const auto& item : model_->named_parameters()) {
    const auto& g = item.value().grad();
    if (!g.defined()) continue;
    const bool nonzero = g.abs().max().item<float>() > 0.0f;
    if (!item.value().requires_grad()) {
      throw std::logic_error("frozen parameter '" + item.key() + "' received a gradient");
    }
    if (nonzero) last_grad_set_.insert(item.key());
  }
}

void StageTrainer::audit_prompt_bank() {
  torch::NoGradGuard no_grad;
  const auto fresh = model_->all_identity_prompt_embeddings();
  const double diff = (fresh - bank_).abs().max().item<double>();
  audit_max_diff_ = std::max(audit_max_diff_, diff);
  ++audits_;
  if (diff > 1e-6) {
    std::ostringstream msg;
    msg << "cached identity-prompt embeddings drifted by " << diff << " at step "
        << global_step_;
    throw NumericError(msg.str());
  }
}

StepResult StageTrainer::step() {
  if (finished()) throw ConfigError("stage " + std::to_string(stage_) + " already finished");
  const auto t0 = std::chrono::steady_clock::now();
  if (step_in_epoch_ == 0) {
    epoch_terms_.clear();
    epoch_wall_ = 0.0;
  }
  apply_lr();
  model_->train();

  const auto batch = sampler_.next();
  model_->zero_grad(true);
  StepResult result;
  const auto loss = stage_ == 1 ? stage1_loss(batch, result.terms) : stage2_loss(batch, result.terms);
  result.total = scalar(loss);
  if (!std::isfinite(result.total)) {
    throw NumericError("stage " + std::to_string(stage_) + " loss is not finite at step " +
                       std::to_string(global_step_));
  }
  loss.backward();
  audit_gradients();
  if (stage_ == 2 && config_.stage2.grad_clip > 0) {
    std::vector<torch::Tensor> params;
    for (auto& [name, p] : optim_params_) params.push_back(p);
    torch::nn::utils::clip_grad_norm_(params, config_.stage2.grad_clip);
  }
  optimizer_->step();

  result.epoch = epoch_;
  result.step = global_step_;
  result.lr = lr();
  ++global_step_;
  ++step_in_epoch_;
  if (stage_ == 2 && bank_.defined() && config_.stage2.prompt_audit_every > 0 &&
      global_step_ % config_.stage2.prompt_audit_every == 0) {
    audit_prompt_bank();
  }

  auto terms = result.terms;
  terms.emplace_back("total", result.total);
  epoch_terms_.push_back(terms);
  history_["steps"].push_back({{"step", result.step}, {"epoch", result.epoch}, {"total", result.total}});
  epoch_wall_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (step_in_epoch_ >= sampler_.steps_per_epoch()) {
    std::map<std::string, double> sums;
    for (const auto& step_terms : epoch_terms_) {
      for (const auto& [k, v] : step_terms) sums[k] += v;
    }
    nlohmann::json record = {{"epoch", epoch_}, {"lr", result.lr}, {"wall_time", epoch_wall_}};
    nlohmann::json mean = nlohmann::json::object();
    for (const auto& [k, v] : sums) mean[k] = v / static_cast<double>(epoch_terms_.size());
    record["losses"] = mean;
    history_["epochs"].push_back(record);
    ++epoch_;
    step_in_epoch_ = 0;
    epoch_terms_.clear();
  }
  return result;
}

nlohmann::json StageTrainer::run_epoch() {
  if (finished()) throw ConfigError("stage " + std::to_string(stage_) + " already finished");
  const auto target = epoch_ + 1;
  while (epoch_ < target) step();
  return history_["epochs"].back();
}

Checkpoint StageTrainer::checkpoint() const {
  Checkpoint c;
  c.meta.config = config_.to_json();
  c.meta.model_config = model_->config();
  c.meta.config_hash = model_config_hash(model_->config());
  c.meta.stage = stage_;
  c.meta.epoch = epoch_;
  c.meta.step = global_step_;
  c.meta.step_in_epoch = step_in_epoch_;
  c.meta.sampler = sampler_.state();
  c.meta.history = history_;
  c.meta.history["partial"] = epoch_terms_;
  c.meta.history["partial_wall_time"] = epoch_wall_;
  c.meta.vocab = data_->vocab.to_json();
  c.meta.identities = data_->identities.to_json();
  c.tensors = module_tensors(*model_);
  for (const auto& [name, p] : optim_params_) {
    auto it = optimizer_->state().find(p.unsafeGetTensorImpl());
    if (it == optimizer_->state().end()) continue;
    const auto& st = static_cast<const torch::optim::AdamWParamState&>(*it->second);
    c.tensors.emplace_back("optim/" + name + "/exp_avg", st.exp_avg());
    c.tensors.emplace_back("optim/" + name + "/exp_avg_sq", st.exp_avg_sq());
    c.tensors.emplace_back("optim/" + name + "/step",
                           torch::tensor(static_cast<float>(st.step())));
  }
  return c;
}

void StageTrainer::save(const std::filesystem::path& dir) const { save_checkpoint(dir, checkpoint()); }

void StageTrainer::restore(const Checkpoint& ckpt, bool allow_mismatch) {
  if (ckpt.meta.stage != stage_) {
    throw ConfigError("checkpoint is from stage " + std::to_string(ckpt.meta.stage) +
                      ", the trainer runs stage " + std::to_string(stage_));
  }
  check_config_hash(ckpt, model_->config(), allow_mismatch);
  load_module_tensors(*model_, ckpt);

  auto& state = optimizer_->state();
  state.clear();
  for (const auto& [name, p] : optim_params_) {
    const auto* m = ckpt.find("optim/" + name + "/exp_avg");
    const auto* v = ckpt.find("optim/" + name + "/exp_avg_sq");
    const auto* s = ckpt.find("optim/" + name + "/step");
    if (m == nullptr || v == nullptr || s == nullptr) continue;
    auto st = std::make_unique<torch::optim::AdamWParamState>();
    st->step(static_cast<int64_t>(std::llround(s->item<double>())));
    st->exp_avg(m->clone().to(p.dtype()));
    st->exp_avg_sq(v->clone().to(p.dtype()));
    state[p.unsafeGetTensorImpl()] = std::move(st);
  }

  sampler_.restore(ckpt.meta.sampler);
  epoch_ = ckpt.meta.epoch;
  step_in_epoch_ = ckpt.meta.step_in_epoch;
  global_step_ = ckpt.meta.step;
  history_ = ckpt.meta.history;
  epoch_terms_.clear();
  if (history_.contains("partial")) {
    for (const auto& step_terms : history_["partial"]) {
      std::vector<std::pair<std::string, double>> terms;
      for (const auto& kv : step_terms) terms.emplace_back(kv[0].get<std::string>(), kv[1].get<double>());
      epoch_terms_.push_back(std::move(terms));
    }
    epoch_wall_ = history_.value("partial_wall_time", 0.0);
    history_.erase("partial");
    history_.erase("partial_wall_time");
  }
  if (stage_ == 2 && config_.ablation.enable_hpl) {
    torch::NoGradGuard no_grad;
    bank_ = model_->all_identity_prompt_embeddings().detach();
  }
}

void StageTrainer::write_metrics_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& columns = stage_loss_terms(stage_);
  out << "epoch,total";
  for (const auto& c : columns) out << ',' << c;
  out << ",lr,wall_time\n";
  out << std::setprecision(10);
  for (const auto& rec : history_["epochs"]) {
    const auto& losses = rec["losses"];
    out << rec["epoch"].get<int64_t>() << ',' << losses["total"].get<double>();
    for (const auto& c : columns) {
      out << ',';
      if (losses.contains(c)) out << losses[c].get<double>();
    }
    out << ',' << rec["lr"].get<double>() << ',' << rec["wall_time"].get<double>() << '\n';
  }
}

}  // namespace unireid
