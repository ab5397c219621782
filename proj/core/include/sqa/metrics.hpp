#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sqa {

/// Half-open interval of feature frames on the audio timeline.
struct FrameSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;

  std::int64_t length() const { return end - start; }
  bool operator==(const FrameSpan&) const = default;
};

/// 1 iff the token sequences are identical.
int exact_match(std::span<const std::int64_t> pred, std::span<const std::int64_t> gold);

/// Harmonic mean of precision/recall over token multisets. Gold must be
/// non-empty.
double token_f1(std::span<const std::int64_t> pred, std::span<const std::int64_t> gold);

/// Frame-set F1 between two spans. Gold must be non-degenerate; a degenerate
/// prediction scores 0.
double frame_f1(FrameSpan pred, FrameSpan gold);

/// Audio overlapping score: intersection-over-union of the frame sets.
double aos(FrameSpan pred, FrameSpan gold);

/// Per-system span prediction over a shared context segmentation.
struct SpanScores {
  std::vector<double> start_dist;
  std::vector<double> end_dist;
};

/// Combines an end-to-end and a cascade prediction by averaging log
/// probabilities per aligned context position and re-decoding.
/// `cascade_to_audio[p]` maps cascade position p to an audio-word position;
/// audio positions with no cascade counterpart take a log(1e-9) floor for the
/// cascade side. Returns the selected (start, end) pair of audio positions.
std::pair<std::int64_t, std::int64_t> ensemble_predict(
    const SpanScores& e2e, const SpanScores& cascade,
    std::span<const std::int64_t> cascade_to_audio, std::int64_t max_span_len);

/// One scored subset (clean / lost / total) for one system.
struct SubsetMetrics {
  std::string subset;
  std::string system;
  std::int64_t count = 0;
  std::optional<double> em;
  std::optional<double> token_f1;
  std::optional<double> frame_f1;
  std::optional<double> aos;
};

/// One WER bucket row for one system.
struct WerBucketRow {
  double lo = 0.0;
  double hi = 0.0;
  std::string system;
  std::int64_t count = 0;
  std::optional<double> frame_f1;
};

struct MetricsReport {
  std::vector<SubsetMetrics> subsets;
  std::vector<WerBucketRow> buckets;

  /// Single header line, then one row per subset and per bucket.
  std::string to_csv() const;
  std::string to_text() const;
};

/// Gold-side information for one evaluated example.
struct EvalGold {
  std::int64_t example_id = 0;
  std::vector<std::int64_t> answer_tokens;
  FrameSpan answer_frames;
  bool lost = false;
  double passage_wer = 0.0;
};

/// One system's final prediction for one example.
struct EvalPrediction {
  std::int64_t example_id = 0;
  std::vector<std::int64_t> tokens;
  FrameSpan frames;
};

struct SystemPredictions {
  std::string system;
  std::vector<EvalPrediction> predictions;
};

/// Scores every system on the clean (lost=false) subset with EM / token F1 /
/// frame F1 / AOS, the lost subset with frame metrics only, and the pooled
/// total with frame metrics. Predictions must cover every gold example.
MetricsReport evaluate_run(const std::vector<EvalGold>& golds,
                           const std::vector<SystemPredictions>& systems);

/// Per-bucket frame F1 for each system; buckets are half-open except the
/// last, which is closed at the top edge. Appends rows to `report`.
void bucket_by_wer(const std::vector<EvalGold>& golds,
                   const std::vector<SystemPredictions>& systems,
                   std::span<const double> bucket_edges, MetricsReport& report);

}  // namespace sqa
