#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sqa/rng.hpp"

namespace sqa {

/// Feature dimensionality of every audio frame.
inline constexpr std::int64_t kFeatureDim = 39;

struct VocabParams {
  std::int64_t proto_len = 12;       // canonical prototype duration in frames
  std::int64_t cluster_size = 4;     // acoustically-near tokens per cluster
  double cluster_spread = 0.5;       // stddev of a token's offset from its cluster
  std::int64_t confusable_k = 8;     // ranked neighbors kept per token
  std::int64_t num_successors = 3;   // bigram fan-out used for passage text
};

/// Token inventory: reserved specials at fixed low indices, content tokens
/// above them. Each content token owns a prototype frame trajectory; the
/// confusability ranking orders other tokens by prototype distance and
/// drives the ASR error channel. Successor lists give passages a learnable
/// local token structure.
struct Vocabulary {
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kCls = 1;
  static constexpr std::int64_t kSep = 2;
  static constexpr std::int64_t kMask = 3;
  static constexpr std::int64_t kNumSpecial = 4;

  std::int64_t num_content = 0;
  std::int64_t proto_len = 0;
  std::uint64_t build_seed = 0;

  /// Prototype trajectories, one per content token, proto_len x kFeatureDim
  /// row-major, values quantized to float32.
  std::vector<std::vector<double>> prototypes;

  /// Ranked confusable neighbors (token ids) per content token.
  std::vector<std::vector<std::int64_t>> confusables;

  /// Likely following tokens (token ids) per content token.
  std::vector<std::vector<std::int64_t>> successors;

  std::int64_t size() const { return num_content + kNumSpecial; }
  bool is_special(std::int64_t token) const {
    return token >= 0 && token < kNumSpecial;
  }
  bool is_content(std::int64_t token) const {
    return token >= kNumSpecial && token < size();
  }
  std::int64_t content_index(std::int64_t token) const;
  std::int64_t content_token(std::int64_t index) const { return index + kNumSpecial; }

  /// Fixed content token used as the question marker.
  std::int64_t marker_token() const { return kNumSpecial; }

  const std::vector<double>& prototype(std::int64_t token) const;
  const std::vector<std::int64_t>& confusables_of(std::int64_t token) const;
  const std::vector<std::int64_t>& successors_of(std::int64_t token) const;
};

/// Deterministic vocabulary for a seed. Prototypes are drawn in clusters so
/// that acoustically-near tokens exist; confusability lists rank other
/// content tokens by mean squared prototype distance.
Vocabulary build_vocabulary(std::int64_t num_content_tokens, std::uint64_t seed,
                            const VocabParams& params = {});

}  // namespace sqa
