#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sqa/metrics.hpp"
#include "sqa/speech_bert.hpp"
#include "sqa/text_encoder.hpp"

namespace sqa {

/// Text QA model over ASR transcript tokens: the comparison system that
/// never sees audio features. Predicted token spans map back to the audio
/// timeline through the ASR boundaries.
struct CascadeModel {
  TextEncoderModel encoder;
  QAHead qa;

  static CascadeModel from_encoder(TextEncoderModel encoder, Rng& rng);

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

/// One cascade training example: question over an ASR token context with the
/// gold span projected onto the transcript (examples whose answers were lost
/// by the channel are excluded upstream).
struct CascadeTrainExample {
  std::vector<std::int64_t> question;
  std::vector<std::int64_t> context;  // asr_tokens
  std::int64_t gold_start = 0;
  std::int64_t gold_end = 0;
};

Tensor cascade_loss(const CascadeModel& model, const CascadeTrainExample& example);

void train_cascade(CascadeModel& model,
                   const std::vector<CascadeTrainExample>& examples,
                   const FinetuneConfig& cfg, std::uint64_t seed,
                   TrainTrace* trace = nullptr);

struct CascadePrediction {
  std::vector<double> start_dist;
  std::vector<double> end_dist;
  std::pair<std::int64_t, std::int64_t> span;
};

CascadePrediction cascade_predict(const CascadeModel& model,
                                  std::span<const std::int64_t> question,
                                  std::span<const std::int64_t> asr_tokens,
                                  std::int64_t max_span_len);

/// Half-open frame interval covered by the token span (i, j) inclusive.
FrameSpan span_tokens_to_frames(std::pair<std::int64_t, std::int64_t> span,
                                std::span<const FrameSpan> boundaries);

}  // namespace sqa
