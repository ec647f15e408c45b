#pragma once

#include <torch/torch.h>

namespace unireid {

// M_id learnable token embeddings per training identity.
class IdentityPromptBankImpl : public torch::nn::Module {
 public:
  IdentityPromptBankImpl(int64_t num_identities, int64_t tokens_per_identity,
                         int64_t width);

  // [batch, M_id, width] rows for the given labels. LabelError when a label
  // is outside [0, num_identities).
  torch::Tensor rows(const torch::Tensor& labels) const;

  int64_t num_identities() const { return tokens.size(0); }
  int64_t tokens_per_identity() const { return tokens.size(1); }

  torch::Tensor tokens;  // [N_id, M_id, width]
};
TORCH_MODULE(IdentityPromptBank);

}  // namespace unireid
