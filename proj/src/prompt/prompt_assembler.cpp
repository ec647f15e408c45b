#include "unireid/prompt/prompt_assembler.h"

#include <string>

#include "unireid/backbone/model_config.h"
#include "unireid/errors.h"

namespace unireid {

PromptAssembler::PromptAssembler(PromptTemplate words, int64_t id_tokens,
                                 int64_t inst_tokens)
    : words_(words), id_tokens_(id_tokens), inst_tokens_(inst_tokens) {}

int64_t PromptAssembler::length(PromptKind kind) const {
  // BOS a photo of [id] person EOS
  const int64_t base = 4 + id_tokens_ + 2;
  return kind == PromptKind::kIdentityOnly ? base : base + 1 + inst_tokens_;
}

std::vector<int64_t> PromptAssembler::layout_ids(PromptKind kind) const {
  std::vector<int64_t> ids = {kBosId, words_.a, words_.photo, words_.of};
  ids.insert(ids.end(), static_cast<size_t>(id_tokens_), kPadId);
  if (kind != PromptKind::kIdentityOnly) {
    ids.push_back(words_.and_word);
    ids.insert(ids.end(), static_cast<size_t>(inst_tokens_), kPadId);
  }
  ids.push_back(words_.person);
  ids.push_back(kEosId);
  return ids;
}

torch::Tensor PromptAssembler::assemble(TextEncoderImpl& word_source,
                                        const torch::Tensor& id_rows,
                                        const torch::Tensor& inst) const {
  const int64_t batch = id_rows.size(0);
  const int64_t width = id_rows.size(2);
  if (id_rows.size(1) != id_tokens_) {
    throw ConfigError("prompt: expected " + std::to_string(id_tokens_) +
                      " identity tokens, got " + std::to_string(id_rows.size(1)));
  }
  const bool full = inst.defined();
  if (full && (inst.size(0) != batch || inst.size(1) != inst_tokens_)) {
    throw ConfigError("prompt: instance tokens must be [batch, " +
                      std::to_string(inst_tokens_) + ", d_t]");
  }

  auto options = torch::TensorOptions().dtype(torch::kInt64);
  auto words = [&](std::initializer_list<int64_t> ids) {
    auto t = word_source.embed_tokens(torch::tensor(std::vector<int64_t>(ids), options))
                 .to(id_rows.dtype());
    return t.unsqueeze(0).expand({batch, static_cast<int64_t>(ids.size()), width});
  };

  std::vector<torch::Tensor> parts;
  parts.push_back(words({kBosId, words_.a, words_.photo, words_.of}));
  parts.push_back(id_rows);
  if (full) {
    parts.push_back(words({words_.and_word}));
    parts.push_back(inst);
  }
  parts.push_back(words({words_.person, kEosId}));
  return torch::cat(parts, 1);
}

PromptSequence assemble_prompt(const PromptAssembler& assembler,
                               TextEncoderImpl& word_source,
                               const IdentityPromptBankImpl& bank,
                               std::optional<int64_t> identity,
                               const std::optional<PseudoPromptTokens>& inst) {
  if (!identity.has_value()) {
    throw LabelError("a prompt needs an identity");
  }
  auto labels = torch::tensor({*identity}, torch::TensorOptions().dtype(torch::kInt64));
  auto id_rows = bank.rows(labels);

  PromptSequence seq;
  torch::Tensor inst_tokens;
  if (inst.has_value()) {
    inst_tokens = inst->tokens.dim() == 2 ? inst->tokens.unsqueeze(0) : inst->tokens;
    seq.kind = inst->source == Modality::kVisual ? PromptKind::kFullVisual
                                                 : PromptKind::kFullTextual;
  } else {
    seq.kind = PromptKind::kIdentityOnly;
  }
  seq.embeddings = assembler.assemble(word_source, id_rows, inst_tokens).squeeze(0);
  seq.eos_index = assembler.eos_index(seq.kind);
  return seq;
}

torch::Tensor encode_prompts(TextEncoderImpl& prompt_encoder,
                             const torch::Tensor& embeddings,
                             int64_t eos_index) {
  auto eos = torch::full({embeddings.size(0)}, eos_index,
                         torch::TensorOptions().dtype(torch::kInt64));
  return prompt_encoder.forward_embeddings(embeddings, eos).eos;
}

torch::Tensor encode_prompt(TextEncoderImpl& prompt_encoder,
                            const PromptSequence& seq) {
  return encode_prompts(prompt_encoder, seq.embeddings.unsqueeze(0), seq.eos_index)
      .squeeze(0);
}

}  // namespace unireid
