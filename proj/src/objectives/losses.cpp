#include "unireid/objectives/losses.h"

#include <algorithm>
#include <limits>
#include <map>
#include <string>

#include "unireid/backbone/similarity.h"
#include "unireid/errors.h"

namespace unireid {
namespace {

constexpr double kLabelSmoothingFloor = 1e-8;

torch::Tensor zero_like_scalar(const torch::Tensor& like) {
  return torch::zeros({}, like.options());
}

torch::Tensor add_defined(const torch::Tensor& acc, const torch::Tensor& term,
                          double weight = 1.0) {
  if (!term.defined()) return acc;
  if (!acc.defined()) return weight == 1.0 ? term : weight * term;
  return weight == 1.0 ? acc + term : acc + weight * term;
}

void check_labels(const torch::Tensor& labels, int64_t num_classes,
                  const char* what) {
  if (labels.numel() == 0) return;
  const auto lo = labels.min().item<int64_t>();
  const auto hi = labels.max().item<int64_t>();
  if (lo < 0 || hi >= num_classes) {
    throw LabelError(std::string(what) + ": label " +
                     std::to_string(lo < 0 ? lo : hi) + " outside [0, " +
                     std::to_string(num_classes) + ")");
  }
}

// Rows of an image-side tensor restricted to B_t2i.
torch::Tensor restrict_to_t2i(const torch::Tensor& x, const BatchViews& views,
                              const char* what) {
  const int64_t rows = x.size(0);
  if (rows == views.t2i_size()) return x;
  if (rows == views.batch_size) return x.index_select(0, views.t2i_index);
  throw ConfigError(std::string(what) + ": expected " +
                    std::to_string(views.batch_size) + " or " +
                    std::to_string(views.t2i_size()) + " rows, got " +
                    std::to_string(rows));
}

void require_rows(const torch::Tensor& x, int64_t rows, const char* what) {
  if (x.size(0) != rows) {
    throw ConfigError(std::string(what) + ": expected " + std::to_string(rows) +
                      " rows, got " + std::to_string(x.size(0)));
  }
}

torch::Tensor mean_squared_distance(const torch::Tensor& a,
                                    const torch::Tensor& b) {
  return (l2_normalize(a) - l2_normalize(b)).pow(2).sum(1).mean();
}

}  // namespace

void LossWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0) {
    throw ConfigError("loss: lambda1 and lambda2 must be non-negative");
  }
  if (!(temperature > 0)) throw ConfigError("loss: temperature must be positive");
  if (triplet_margin < 0) throw ConfigError("loss: margin must be non-negative");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lambda1", w.lambda1},
                     {"lambda2", w.lambda2},
                     {"temperature", w.temperature},
                     {"learnable_temperature", w.learnable_temperature},
                     {"margin", w.triplet_margin}};
}

torch::Tensor BatchViews::i2i_index() const {
  auto in_t2i = torch::zeros({batch_size}, torch::TensorOptions().dtype(torch::kBool));
  if (t2i_size() > 0) in_t2i.index_fill_(0, t2i_index, true);
  return (~in_t2i).nonzero().view({-1});
}

void BatchViews::validate() const {
  if (t2i_size() == 0) return;
  if (t2i_index.dim() != 1) throw InputError("t2i_index must be one-dimensional");
  auto sorted = std::get<0>(t2i_index.sort());
  if (sorted.min().item<int64_t>() < 0 ||
      sorted.max().item<int64_t>() >= batch_size) {
    throw InputError("B_t2i contains indices outside B");
  }
  if (std::get<0>(torch::_unique(sorted)).numel() != sorted.numel()) {
    throw InputError("B_t2i contains duplicate indices");
  }
}

torch::Tensor sdm_loss(const torch::Tensor& img, const torch::Tensor& txt,
                       const torch::Tensor& labels,
                       const torch::Tensor& temperature) {
  const int64_t n = img.size(0);
  if (n < 2) throw InputError("sdm_loss needs at least 2 samples");
  require_rows(txt, n, "sdm_loss text");
  require_rows(labels, n, "sdm_loss labels");

  auto sim = torch::matmul(l2_normalize(img), l2_normalize(txt).t());
  auto match = (labels.view({n, 1}) == labels.view({1, n})).to(img.dtype());
  auto target = match / match.sum(1, /*keepdim=*/true);
  target = torch::where(target > 0, target,
                        torch::full_like(target, kLabelSmoothingFloor));
  auto log_target = torch::log(target / target.sum(1, /*keepdim=*/true));

  auto kl = [&](const torch::Tensor& logits) {
    auto log_p = torch::log_softmax(logits, 1);
    return (log_p.exp() * (log_p - log_target)).sum(1).mean();
  };
  // The label-match matrix is symmetric, so one target serves both directions.
  return 0.5 * (kl(sim / temperature) + kl(sim.t() / temperature));
}

torch::Tensor identity_loss(const torch::Tensor& logits,
                            const torch::Tensor& labels) {
  require_rows(labels, logits.size(0), "identity_loss labels");
  check_labels(labels, logits.size(1), "identity_loss");
  return torch::nn::functional::cross_entropy(logits, labels.to(torch::kInt64));
}

torch::Tensor t2i_identity_loss(const torch::Tensor& img_logits,
                                const torch::Tensor& txt_logits,
                                const torch::Tensor& labels) {
  return 0.5 * (identity_loss(img_logits, labels) +
                identity_loss(txt_logits, labels));
}

torch::Tensor triplet_loss(const torch::Tensor& features,
                           const torch::Tensor& labels, double margin) {
  const int64_t n = features.size(0);
  require_rows(labels, n, "triplet_loss labels");
  {
    std::map<int64_t, int64_t> counts;
    auto acc = labels.to(torch::kInt64).contiguous();
    for (int64_t i = 0; i < n; ++i) ++counts[acc[i].item<int64_t>()];
    if (counts.size() < 2) {
      throw InputError("triplet_loss needs at least 2 identities");
    }
    for (const auto& [label, count] : counts) {
      if (count < 2) {
        throw InputError("triplet_loss: identity " + std::to_string(label) +
                         " has a single instance");
      }
    }
  }

  auto f = l2_normalize(features);
  auto sq = (f.unsqueeze(1) - f.unsqueeze(0)).pow(2).sum(-1);
  auto positive_sq = sq > 0;
  // sqrt with a zero (not infinite) gradient at coincident points.
  auto dist = torch::where(positive_sq, sq.clamp_min(1e-30).sqrt(),
                           torch::zeros_like(sq));

  auto same = labels.view({n, 1}) == labels.view({1, n});
  auto eye = torch::eye(n, torch::TensorOptions().dtype(torch::kBool));
  const double inf = std::numeric_limits<double>::infinity();
  auto hardest_pos =
      dist.masked_fill(~same | eye, -inf).amax(1);
  auto hardest_neg = dist.masked_fill(same, inf).amin(1);
  return torch::relu(hardest_pos - hardest_neg + margin).mean();
}

PromptContrastiveLoss prompt_contrastive(const torch::Tensor& img,
                                         const torch::Tensor& refs,
                                         const torch::Tensor& temperature) {
  require_rows(refs, img.size(0), "prompt_contrastive refs");
  // logits[i][j] = sim(image i, prompt of sample j) / temperature
  auto logits =
      torch::matmul(l2_normalize(img), l2_normalize(refs).t()) / temperature;
  auto diag = logits.diagonal();
  PromptContrastiveLoss out;
  out.t2i = -(diag - torch::logsumexp(logits, 0)).mean();
  out.i2t = -(diag - torch::logsumexp(logits, 1)).mean();
  return out;
}

torch::Tensor inversion_consistency(const torch::Tensor& vis_prompt_emb,
                                    const torch::Tensor& cls_t2i,
                                    const torch::Tensor& txt_prompt_emb,
                                    const torch::Tensor& txt_eos,
                                    const BatchViews& views) {
  require_rows(vis_prompt_emb, views.batch_size, "inversion_consistency visual");
  require_rows(cls_t2i, views.batch_size, "inversion_consistency cls_t2i");
  auto loss = mean_squared_distance(vis_prompt_emb, cls_t2i);
  if (views.t2i_size() > 0) {
    require_rows(txt_prompt_emb, views.t2i_size(), "inversion_consistency text");
    require_rows(txt_eos, views.t2i_size(), "inversion_consistency eos");
    loss = loss + mean_squared_distance(txt_prompt_emb, txt_eos);
  }
  return loss;
}

IlpaLoss ilpa_loss(const torch::Tensor& txt_prompt_emb,
                   const torch::Tensor& cls_t2i,
                   const torch::Tensor& vis_prompt_emb,
                   const torch::Tensor& txt_eos, const BatchViews& views) {
  IlpaLoss out;
  if (views.t2i_size() == 0) {
    out.empty = true;
    out.tgps = zero_like_scalar(cls_t2i);
    out.vgps = zero_like_scalar(cls_t2i);
    out.total = zero_like_scalar(cls_t2i);
    return out;
  }
  const int64_t paired = views.t2i_size();
  require_rows(txt_prompt_emb, paired, "ilpa text prompt");
  require_rows(txt_eos, paired, "ilpa caption features");
  out.tgps = mean_squared_distance(txt_prompt_emb,
                                   restrict_to_t2i(cls_t2i, views, "ilpa cls_t2i"));
  out.vgps = mean_squared_distance(
      restrict_to_t2i(vis_prompt_emb, views, "ilpa visual prompt"), txt_eos);
  out.total = out.tgps + out.vgps;
  return out;
}

torch::Tensor cic_loss(const torch::Tensor& cls_i2i,
                       const torch::Tensor& bank_embeddings,
                       const torch::Tensor& labels,
                       const torch::Tensor& temperature,
                       int64_t num_identities) {
  if (bank_embeddings.size(0) != num_identities) {
    throw ConfigError("cic_loss: identity prompt bank has " +
                      std::to_string(bank_embeddings.size(0)) + " rows, expected " +
                      std::to_string(num_identities));
  }
  auto logits = torch::matmul(l2_normalize(cls_i2i),
                              l2_normalize(bank_embeddings).t()) /
                temperature;
  return identity_loss(logits, labels);
}

torch::Tensor cmpr_loss(const torch::Tensor& p_text,
                        const torch::Tensor& p_visual, const BatchViews& views) {
  if (views.t2i_size() == 0) return zero_like_scalar(p_visual);
  auto visual = restrict_to_t2i(p_visual, views, "cmpr visual tokens");
  if (p_text.sizes() != visual.sizes()) {
    throw ConfigError("cmpr_loss: text and visual pseudo-token shapes differ");
  }
  return (p_text - visual).pow(2).sum({1, 2}).mean();
}

torch::Tensor stage1_objective(const Stage1Parts& parts) {
  return parts.t2i + parts.i2t + parts.ic;
}

Stage2Parts base_losses(const torch::Tensor& cls_t2i, const torch::Tensor& cls_i2i,
                        const torch::Tensor& txt_eos, const BatchViews& views,
                        const BaseHeads& heads, const torch::Tensor& temperature,
                        double margin) {
  require_rows(cls_t2i, views.batch_size, "base_losses cls_t2i");
  require_rows(cls_i2i, views.batch_size, "base_losses cls_i2i");
  require_rows(txt_eos, views.t2i_size(), "base_losses caption features");
  Stage2Parts parts;
  const auto labels_t2i = views.labels.index_select(0, views.t2i_index);
  const auto img_t2i = cls_t2i.index_select(0, views.t2i_index);
  parts.sdm = sdm_loss(img_t2i, txt_eos, labels_t2i, temperature);
  parts.id_t2i = t2i_identity_loss(heads.t2i_classifier(img_t2i),
                                   heads.t2i_classifier(txt_eos), labels_t2i);
  const auto i2i = views.i2i_index();
  parts.triplet = triplet_loss(cls_i2i.index_select(0, i2i),
                               views.labels.index_select(0, i2i), margin);
  parts.id_i2i = identity_loss(heads.i2i_classifier(cls_i2i), views.labels);
  return parts;
}

torch::Tensor base_objective(const Stage2Parts& parts) {
  torch::Tensor total;
  total = add_defined(total, parts.sdm);
  total = add_defined(total, parts.id_t2i);
  total = add_defined(total, parts.triplet);
  total = add_defined(total, parts.id_i2i);
  if (!total.defined()) throw ConfigError("stage II objective has no base terms");
  return total;
}

torch::Tensor stage2_objective(const Stage2Parts& parts, const LossWeights& w) {
  auto total = base_objective(parts);
  total = add_defined(total, parts.cic);
  total = add_defined(total, parts.ilpa, w.lambda1);
  total = add_defined(total, parts.cmpr, w.lambda2);
  return total;
}

}  // namespace unireid
