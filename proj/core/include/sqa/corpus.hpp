#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sqa/metrics.hpp"
#include "sqa/vocab.hpp"

namespace sqa {

/// A variable-length sequence of feature frames realizing one spoken word.
struct AudioWord {
  std::vector<double> frames;  // num_frames x kFeatureDim, row-major, f32-exact
  std::int64_t num_frames = 0;
  std::int64_t token_label = -1;
  std::int64_t frame_offset = 0;  // absolute start frame within the passage
};

struct SynthParams {
  std::int64_t dur_min = 6;
  std::int64_t dur_max = 18;
  double sigma = 0.25;  // additive feature noise
};

struct ChannelParams {
  double sub_frac = 0.8;  // share of the error mass per kind
  double del_frac = 0.1;
  double ins_frac = 0.1;
  std::int64_t jitter = 2;  // boundary jitter in frames
};

/// Ordered audio words plus reference labels and the ASR-channel view.
struct SpokenPassage {
  std::vector<AudioWord> words;
  std::vector<std::int64_t> true_tokens;
  std::vector<FrameSpan> true_boundaries;

  // Channel fields; valid only after apply_asr_channel.
  bool channel_applied = false;
  std::vector<std::int64_t> asr_tokens;
  std::vector<FrameSpan> asr_boundaries;
  /// Source word index per ASR position; -1 marks an insertion.
  std::vector<std::int64_t> asr_alignment;
  double wer = 0.0;
  double target_wer = 0.0;

  std::int64_t total_frames() const;
  /// All frames concatenated, total_frames x kFeatureDim row-major.
  std::vector<double> all_frames() const;
};

/// One spoken question-answering example over a passage.
struct QAExample {
  std::int64_t id = 0;
  std::int64_t passage_id = 0;
  std::vector<std::int64_t> question;
  std::int64_t answer_start_word = 0;  // inclusive, true segmentation
  std::int64_t answer_end_word = 0;    // inclusive
  FrameSpan answer_frame_span;
  bool lost = false;
  /// Contiguous aligned span in asr_tokens when the answer survived the
  /// channel verbatim (lost == false).
  std::optional<std::pair<std::int64_t, std::int64_t>> asr_answer_span;
  bool is_test = false;
};

struct GenConfig {
  std::int64_t num_content_tokens = 100;
  std::int64_t num_examples = 900;
  std::int64_t passage_len_min = 12;
  std::int64_t passage_len_max = 18;
  std::int64_t answer_len_max = 3;
  SynthParams synth;
  ChannelParams channel;
  std::vector<double> wer_targets = {0.25};
  double test_fraction = 0.2;
  VocabParams vocab;
};

struct QaDataset {
  Vocabulary vocab;
  std::vector<SpokenPassage> passages;  // one per example, same index
  std::vector<QAExample> examples;
  GenConfig gen;
  std::uint64_t seed = 0;
};

/// Prototype trajectory time-warped to a sampled duration plus additive
/// Gaussian noise; identical (token, seed) gives identical output.
AudioWord synthesize_audio_word(const Vocabulary& vocab, std::int64_t token,
                                std::uint64_t seed, const SynthParams& params = {});

/// Concatenates synthesized words; boundaries tile [0, total_frames).
SpokenPassage synthesize_passage(const Vocabulary& vocab,
                                 std::span<const std::int64_t> tokens,
                                 std::uint64_t seed, const SynthParams& params = {});

/// Word error rate (S + D + I) / |ref| under unit-cost edit distance.
double compute_wer(std::span<const std::int64_t> ref,
                   std::span<const std::int64_t> hyp);

/// Per-word substitution/deletion/insertion channel with acoustically
/// confusable substitutions; boundaries jittered, merged on deletion and
/// split on insertion. Records the achieved WER.
void apply_asr_channel(const Vocabulary& vocab, SpokenPassage& passage,
                       double target_wer, std::uint64_t seed,
                       const ChannelParams& params = {});

/// Full dataset: passages via successor-structured token walks, templated
/// questions (marker + left context + right context), lost flags from the
/// channel alignment, and a seeded train/test split.
QaDataset generate_qa_dataset(const GenConfig& config, std::uint64_t seed);

}  // namespace sqa
