#pragma once

#include <torch/torch.h>

#include <functional>

#include "json.hpp"

namespace unireid {

struct LossWeights {
  double lambda1 = 0.4;   // instance-level prompt alignment
  double lambda2 = 0.06;  // cross-modal prompt regularization
  double temperature = 0.07;
  bool learnable_temperature = true;
  double triplet_margin = 0.3;

  void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);

// Index views of one joint batch. Image-side tensors span B; caption-side
// tensors span B_t2i, in the order of t2i_index.
struct BatchViews {
  int64_t batch_size = 0;   // |B|
  torch::Tensor t2i_index;  // [|B_t2i|] int64 positions into B, ascending
  torch::Tensor labels;     // [|B|] unified identity labels
  torch::Tensor cameras;    // [|B|]

  int64_t t2i_size() const { return t2i_index.defined() ? t2i_index.numel() : 0; }
  // Positions of B not in B_t2i.
  torch::Tensor i2i_index() const;
  // Throws InputError unless B_t2i is a duplicate-free subset of B.
  void validate() const;
};

// Similarity distribution matching: KL between the softmaxed cross-modal
// similarity rows and the normalized label-match distribution, averaged
// over the image-to-text and text-to-image directions. Zero entries of the
// label distribution are smoothed to 1e-8 before renormalizing.
torch::Tensor sdm_loss(const torch::Tensor& img, const torch::Tensor& txt,
                       const torch::Tensor& labels,
                       const torch::Tensor& temperature);

// Mean softmax cross-entropy. LabelError if a label is out of range.
torch::Tensor identity_loss(const torch::Tensor& logits,
                            const torch::Tensor& labels);

// Shared-classifier cross-modal identity loss: the mean of the image and the
// caption cross-entropies.
torch::Tensor t2i_identity_loss(const torch::Tensor& img_logits,
                                const torch::Tensor& txt_logits,
                                const torch::Tensor& labels);

// Batch-hard triplet loss on L2-normalized features with Euclidean distance.
// Requires at least two identities with at least two samples each.
torch::Tensor triplet_loss(const torch::Tensor& features,
                           const torch::Tensor& labels, double margin);

struct PromptContrastiveLoss {
  torch::Tensor t2i;  // prompt fixed, softmax over images
  torch::Tensor i2t;  // image fixed, softmax over prompts
};

// Contrastive alignment of image class tokens with per-sample identity
// prompt embeddings (refs[i] encodes the prompt of labels[i]).
PromptContrastiveLoss prompt_contrastive(const torch::Tensor& img,
                                         const torch::Tensor& refs,
                                         const torch::Tensor& temperature);

// Mean squared distance between vision-prompt embeddings and the T2I class
// tokens over B, plus between text-prompt embeddings and caption features
// over B_t2i.
torch::Tensor inversion_consistency(const torch::Tensor& vis_prompt_emb,
                                    const torch::Tensor& cls_t2i,
                                    const torch::Tensor& txt_prompt_emb,
                                    const torch::Tensor& txt_eos,
                                    const BatchViews& views);

struct IlpaLoss {
  torch::Tensor total;
  torch::Tensor tgps;  // text-derived prompt vs image class token
  torch::Tensor vgps;  // vision-derived prompt vs caption feature
  bool empty = false;  // B_t2i was empty; all terms are zero
};

// Image-side arguments may span B or already be restricted to B_t2i.
IlpaLoss ilpa_loss(const torch::Tensor& txt_prompt_emb,
                   const torch::Tensor& cls_t2i,
                   const torch::Tensor& vis_prompt_emb,
                   const torch::Tensor& txt_eos, const BatchViews& views);

// Cross-entropy of I2I class tokens against all identity-prompt embeddings,
// mean-reduced over the batch (the written form sums; multiply by |B|).
torch::Tensor cic_loss(const torch::Tensor& cls_i2i,
                       const torch::Tensor& bank_embeddings,
                       const torch::Tensor& labels,
                       const torch::Tensor& temperature,
                       int64_t num_identities);

// Mean over B_t2i of the squared Frobenius distance between text- and
// vision-derived pseudo-token matrices. p_visual may span B or B_t2i.
torch::Tensor cmpr_loss(const torch::Tensor& p_text,
                        const torch::Tensor& p_visual, const BatchViews& views);

struct Stage1Parts {
  torch::Tensor t2i;
  torch::Tensor i2t;
  torch::Tensor ic;
};

torch::Tensor stage1_objective(const Stage1Parts& parts);

// Undefined terms count as zero (ablated components).
struct Stage2Parts {
  torch::Tensor sdm;
  torch::Tensor id_t2i;
  torch::Tensor triplet;
  torch::Tensor id_i2i;
  torch::Tensor cic;
  torch::Tensor ilpa;
  torch::Tensor cmpr;
};

// Classifier heads applied by base_losses; the I2I head includes the neck.
struct BaseHeads {
  std::function<torch::Tensor(const torch::Tensor&)> t2i_classifier;
  std::function<torch::Tensor(const torch::Tensor&)> i2i_classifier;
};

// The four base terms with their routing: SDM and the shared-classifier
// T2I identity loss read cls_t2i over B_t2i with the caption features;
// the triplet reads cls_i2i over B minus B_t2i and the I2I identity loss
// reads cls_i2i over all of B. cls_t2i and cls_i2i span B; txt_eos spans
// B_t2i.
Stage2Parts base_losses(const torch::Tensor& cls_t2i, const torch::Tensor& cls_i2i,
                        const torch::Tensor& txt_eos, const BatchViews& views,
                        const BaseHeads& heads, const torch::Tensor& temperature,
                        double margin);

torch::Tensor base_objective(const Stage2Parts& parts);
torch::Tensor stage2_objective(const Stage2Parts& parts, const LossWeights& w);

}  // namespace unireid
