#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqa/adam.hpp"
#include "sqa/corpus.hpp"
#include "sqa/tensor.hpp"
#include "sqa/text_encoder.hpp"

namespace sqa {

struct LstmParams {
  Tensor wx;  // input x 4H, gate order [i, f, g, o]
  Tensor wh;  // H x 4H
  Tensor b;   // 4H
};

/// Sequence autoencoder over an audio word's frames. A bidirectional
/// recurrent encoder summarizes the frames; two fully-connected layers map
/// the summary to the bottleneck z (same dimension as the text embeddings);
/// a unidirectional recurrent decoder reconstructs the frames from z, which
/// is fed both as the initial state and as the per-step input.
struct JointEmbedder {
  std::int64_t hidden = 0;
  LstmParams enc_fwd, enc_bwd;  // input kFeatureDim
  Tensor proj1_w, proj1_b;      // 2H x H
  Tensor proj2_w, proj2_b;      // H x H
  LstmParams dec;               // input H
  Tensor out_w, out_b;          // H x kFeatureDim

  static JointEmbedder init(std::int64_t hidden, Rng& rng);

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  /// Bottleneck for a frame matrix [T x kFeatureDim]; returns [1 x H].
  Tensor encode(const Tensor& frames) const;

  /// Reconstruction [T x kFeatureDim] from a bottleneck [1 x H].
  Tensor decode(const Tensor& z, std::int64_t num_frames) const;
};

/// The encoded vector for one audio word.
struct JointEmbedding {
  std::vector<double> z;
  std::int64_t token_label = -1;
};

JointEmbedding encode_audio(const JointEmbedder& model, const AudioWord& word);

std::vector<double> decode_audio(const JointEmbedder& model,
                                 std::span<const double> z, std::int64_t num_frames);

/// Sum over frames of squared L2 distance between input and reconstruction.
Tensor reconstruction_loss(const Tensor& x, const Tensor& y);

/// L1 distance between z and the text embedding of the token label. The
/// anchor row is detached when `freeze_emb` is set, so gradients reach z
/// only.
Tensor l1_anchor_loss(const Tensor& z, std::int64_t token, const Tensor& emb,
                      bool freeze_emb = true);

struct JointTrainConfig {
  std::int64_t epochs = 5;
  std::int64_t batch_size = 16;
  double lambda_l1 = 1.0;
  AdamConfig adam;
};

struct JointTrainTrace {
  std::vector<double> epoch_mean_recons;
  std::vector<double> epoch_mean_l1;
  std::int64_t batch_size = 0;
};

/// Minimizes recons + lambda * L1 with the text embedding table frozen.
void train_joint_embedding(JointEmbedder& model,
                           const std::vector<const AudioWord*>& words,
                           const TextEncoderModel& text_model,
                           const JointTrainConfig& cfg, std::uint64_t seed,
                           JointTrainTrace* trace = nullptr);

enum class BoundarySource { kTrue, kAsr };

/// One embedding per word of the passage under the chosen segmentation.
std::vector<JointEmbedding> embed_utterance(const JointEmbedder& model,
                                            const SpokenPassage& passage,
                                            BoundarySource source);

}  // namespace sqa
