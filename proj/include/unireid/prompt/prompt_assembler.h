#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

#include "unireid/backbone/text_encoder.h"
#include "unireid/prompt/identity_prompt_bank.h"
#include "unireid/prompt/inversion_network.h"

namespace unireid {

enum class PromptKind { kIdentityOnly, kFullVisual, kFullTextual };

// Vocabulary ids of the fixed template words.
struct PromptTemplate {
  int64_t a = 0;
  int64_t photo = 0;
  int64_t of = 0;
  int64_t and_word = 0;
  int64_t person = 0;
};

struct PromptSequence {
  torch::Tensor embeddings;  // [L, d_t]
  int64_t eos_index = 0;
  PromptKind kind = PromptKind::kIdentityOnly;
};

// Splices identity and instance tokens into
//   BOS a photo of [id-tokens] person EOS
//   BOS a photo of [id-tokens] and [inst-tokens] person EOS
// at the embedding level. Word positions use the encoder's vocabulary
// embeddings; the layout (and so the EOS position) is fixed per kind.
class PromptAssembler {
 public:
  PromptAssembler(PromptTemplate words, int64_t id_tokens, int64_t inst_tokens);

  int64_t length(PromptKind kind) const;
  int64_t eos_index(PromptKind kind) const { return length(kind) - 1; }
  int64_t id_slot() const { return 4; }
  int64_t inst_slot() const { return id_slot() + id_tokens_ + 1; }
  int64_t id_tokens() const { return id_tokens_; }
  int64_t inst_tokens() const { return inst_tokens_; }

  // Token ids of the layout with kPadId at the spliced positions.
  std::vector<int64_t> layout_ids(PromptKind kind) const;

  // id_rows: [batch, M_id, d_t]; inst: [batch, K, d_t] or undefined for the
  // identity-only template. Returns [batch, L, d_t].
  torch::Tensor assemble(TextEncoderImpl& word_source,
                         const torch::Tensor& id_rows,
                         const torch::Tensor& inst) const;

 private:
  PromptTemplate words_;
  int64_t id_tokens_;
  int64_t inst_tokens_;
};

// Single-prompt assembly. identity must index the bank; a missing identity
// is a LabelError.
PromptSequence assemble_prompt(const PromptAssembler& assembler,
                               TextEncoderImpl& word_source,
                               const IdentityPromptBankImpl& bank,
                               std::optional<int64_t> identity,
                               const std::optional<PseudoPromptTokens>& inst);

// EOS-pooled joint embeddings of assembled prompts, [batch, d_e].
torch::Tensor encode_prompts(TextEncoderImpl& prompt_encoder,
                             const torch::Tensor& embeddings,
                             int64_t eos_index);

torch::Tensor encode_prompt(TextEncoderImpl& prompt_encoder,
                            const PromptSequence& seq);

}  // namespace unireid
