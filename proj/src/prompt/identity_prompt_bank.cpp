#include "unireid/prompt/identity_prompt_bank.h"

#include <string>

#include "unireid/backbone/transformer.h"
#include "unireid/errors.h"

namespace unireid {

IdentityPromptBankImpl::IdentityPromptBankImpl(int64_t num_identities,
                                               int64_t tokens_per_identity,
                                               int64_t width) {
  tokens = register_parameter(
      "tokens", torch::empty({num_identities, tokens_per_identity, width}));
  trunc_normal_(tokens, 0.02);
}

torch::Tensor IdentityPromptBankImpl::rows(const torch::Tensor& labels) const {
  if (labels.numel() > 0) {
    const auto lo = labels.min().item<int64_t>();
    const auto hi = labels.max().item<int64_t>();
    if (lo < 0 || hi >= num_identities()) {
      throw LabelError("identity label " + std::to_string(lo < 0 ? lo : hi) +
                       " outside [0, " + std::to_string(num_identities()) + ")");
    }
  }
  return tokens.index_select(0, labels.to(torch::kInt64));
}

}  // namespace unireid
