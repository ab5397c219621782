#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqa/adam.hpp"
#include "sqa/ops.hpp"
#include "sqa/tensor.hpp"
#include "sqa/vocab.hpp"

namespace sqa {

struct ModelDims {
  std::int64_t vocab_size = 0;
  std::int64_t hidden = 64;
  std::int64_t layers = 2;
  std::int64_t heads = 2;
  std::int64_t max_seq = 128;
  std::int64_t ffn_mult = 4;
};

struct TransformerBlock {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln1_gain, ln1_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor ln2_gain, ln2_bias;
};

struct MlmHead {
  Tensor transform_w, transform_b;
  Tensor ln_gain, ln_bias;
  Tensor out_bias;  // [V]; logits tie to the embedding table transpose
};

/// Attention probabilities captured during a forward pass, one [n x n]
/// row-major matrix per (layer, head).
struct AttnTrace {
  std::vector<std::vector<std::vector<double>>> per_layer_head;
};

/// Token/positional/segment embeddings, a stack of post-norm transformer
/// blocks, and an MLM head tied to the embedding table.
struct TextEncoderModel {
  ModelDims dims;
  Tensor emb;  // V x H
  Tensor pos;  // max_seq x H
  Tensor seg;  // 2 x H
  std::vector<TransformerBlock> blocks;
  MlmHead mlm;

  static TextEncoderModel init(const ModelDims& dims, Rng& rng);

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  /// E'[i] = Emb[token_i] + pos[i] + seg[segment_i].
  Tensor embed_tokens(std::span<const std::int64_t> tokens,
                      std::span<const std::int64_t> segment_ids) const;

  /// Applies the transformer stack to an embedded sequence [n x H].
  Tensor encode(const Tensor& embedded, AttnTrace* trace = nullptr) const;

  /// MLM logits [n x V] from encoded hidden states.
  Tensor mlm_logits(const Tensor& hidden) const;
};

enum class MaskingScheme {
  kMaskOnly,  // every selected position becomes MASK
  kBert,      // 80% MASK / 10% random content token / 10% keep
};

struct MaskedBatch {
  std::vector<std::int64_t> input_tokens;   // with masked positions replaced
  std::vector<std::int64_t> mask_positions; // strictly increasing
  std::vector<std::int64_t> mask_targets;   // original ids at those positions
};

/// Masks each maskable (non-special) position independently with the given
/// rate; if none is selected, one maskable position is forced uniformly.
MaskedBatch apply_mlm_mask(std::span<const std::int64_t> tokens,
                           const Vocabulary& vocab, double rate, Rng& rng,
                           MaskingScheme scheme = MaskingScheme::kMaskOnly);

/// Cross-entropy of the MLM head at the masked positions only.
Tensor mlm_loss(const TextEncoderModel& model, const MaskedBatch& batch);

struct TrainTrace {
  std::vector<double> epoch_mean_loss;
};

struct TextPretrainConfig {
  std::int64_t epochs = 3;
  std::int64_t batch_size = 8;
  double masking_rate = 0.15;
  MaskingScheme scheme = MaskingScheme::kMaskOnly;
  AdamConfig adam;
};

/// MLM pre-training over token sequences (each is wrapped as
/// [CLS] tokens [SEP] internally). No next-sentence objective.
void pretrain_text(TextEncoderModel& model,
                   const std::vector<std::vector<std::int64_t>>& sequences,
                   const Vocabulary& vocab, const TextPretrainConfig& cfg,
                   std::uint64_t seed, TrainTrace* trace = nullptr);

/// Fraction of held-out masked positions whose argmax prediction matches.
double masked_token_accuracy(const TextEncoderModel& model,
                             const std::vector<std::vector<std::int64_t>>& sequences,
                             const Vocabulary& vocab, double rate, std::uint64_t seed);

}  // namespace sqa
