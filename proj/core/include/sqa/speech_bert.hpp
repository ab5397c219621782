#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sqa/joint_embed.hpp"
#include "sqa/text_encoder.hpp"

namespace sqa {

struct QAHead {
  Tensor start_vec;  // [H]
  Tensor end_vec;    // [H]

  static QAHead init(std::int64_t hidden, Rng& rng);
};

/// One transformer for both modalities: text enters through the embedding
/// table, audio enters as precomputed joint-embedding vectors.
struct SpeechBertModel {
  TextEncoderModel encoder;
  QAHead qa;

  static SpeechBertModel init(const ModelDims& dims, Rng& rng);
  static SpeechBertModel from_encoder(TextEncoderModel encoder, Rng& rng);

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

/// Assembled [CLS] question [SEP] audio words [SEP] input. Audio rows carry
/// the joint embeddings plus positional and segment embeddings.
struct QaInput {
  Tensor embedded;              // [(q + n + 3) x H]
  std::int64_t context_offset;  // index of the first audio position
  std::int64_t context_len;     // number of audio positions
};

QaInput assemble_qa_input(const TextEncoderModel& model,
                          std::span<const std::int64_t> question,
                          const std::vector<JointEmbedding>& audio);

/// Start/end distributions over the audio positions only (text and special
/// positions are excluded from the softmax).
struct QaForwardOut {
  Tensor start_logits;  // [1 x n]
  Tensor end_logits;    // [1 x n]
  std::vector<double> start_dist;
  std::vector<double> end_dist;
};

QaForwardOut qa_forward(const SpeechBertModel& model, const QaInput& input);

/// Argmax over pairs i <= j <= i + max_span_len - 1 of
/// log start[i] + log end[j]; ties break to the smallest i, then smallest j.
std::pair<std::int64_t, std::int64_t> select_span(std::span<const double> start_dist,
                                                  std::span<const double> end_dist,
                                                  std::int64_t max_span_len);

/// One item of a mixed pre-training batch: a text token sequence or an
/// audio-embedded sequence with its token labels.
struct TextItem {
  std::vector<std::int64_t> tokens;
};
struct AudioItem {
  std::vector<JointEmbedding> embeddings;  // labels required for training
};
using MixedItem = std::variant<TextItem, AudioItem>;

/// Masked-language-model loss over a mixed batch: masked text positions and
/// masked audio positions are both scored by the shared MLM head against
/// token targets. Masked audio rows are replaced by the MASK embedding.
Tensor mixed_mlm_step(const SpeechBertModel& model, const Vocabulary& vocab,
                      std::span<const MixedItem> items, double masking_rate,
                      Rng& rng, MaskingScheme scheme = MaskingScheme::kMaskOnly);

struct MixedPretrainConfig {
  std::int64_t epochs = 3;
  std::int64_t batch_size = 8;
  double masking_rate = 0.15;
  MaskingScheme scheme = MaskingScheme::kMaskOnly;
  AdamConfig adam;
};

/// MLM pre-training over the mixture of text and audio items. The audio
/// encoder is frozen by construction: items carry precomputed embeddings.
void pretrain_speechbert(SpeechBertModel& model, const Vocabulary& vocab,
                         const std::vector<MixedItem>& items,
                         const MixedPretrainConfig& cfg, std::uint64_t seed,
                         TrainTrace* trace = nullptr);

/// Masked-audio-token accuracy on held-out audio items.
double masked_audio_accuracy(const SpeechBertModel& model, const Vocabulary& vocab,
                             const std::vector<AudioItem>& items, double rate,
                             std::uint64_t seed);

/// One fine-tuning example: a question over an audio-embedded context with
/// gold start/end positions in that context.
struct QaTrainExample {
  std::vector<std::int64_t> question;
  std::vector<JointEmbedding> context;
  std::int64_t gold_start = 0;
  std::int64_t gold_end = 0;
};

/// Per-example loss: cross-entropy of the start plus cross-entropy of the
/// end distribution (about 2 ln n at uniform initialization).
Tensor qa_loss(const SpeechBertModel& model, const QaTrainExample& example);

struct FinetuneConfig {
  std::int64_t epochs = 4;
  std::int64_t batch_size = 8;
  AdamConfig adam;
};

/// Fine-tunes the transformer, embeddings, and QA head; the audio encoder
/// stays frozen (contexts are precomputed embeddings).
void finetune_qa(SpeechBertModel& model, const std::vector<QaTrainExample>& examples,
                 const FinetuneConfig& cfg, std::uint64_t seed,
                 TrainTrace* trace = nullptr);

}  // namespace sqa
