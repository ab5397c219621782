#include "sqa/joint_embed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "sqa/error.hpp"
#include "sqa/ops.hpp"

namespace sqa {

namespace {

Tensor linear_init(Shape shape, Rng& rng) {
  const double bound =
      std::sqrt(6.0 / (static_cast<double>(shape[0]) + static_cast<double>(shape[1])));
  return Tensor::rand_uniform(std::move(shape), rng, -bound, bound, true);
}

LstmParams lstm_init(std::int64_t input, std::int64_t hidden, Rng& rng) {
  LstmParams p;
  p.wx = linear_init({input, 4 * hidden}, rng);
  p.wh = linear_init({hidden, 4 * hidden}, rng);
  // Forget gate bias starts positive so early training keeps state.
  std::vector<double> bias(4 * hidden, 0.0);
  for (std::int64_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;
  p.b = Tensor::from_data({4 * hidden}, std::move(bias), true);
  return p;
}

struct LstmStepOut {
  Tensor h;
  Tensor c;
};

/// One cell update. `gates_x` is the precomputed x_t * Wx row [1 x 4H].
LstmStepOut lstm_step(const LstmParams& p, const Tensor& gates_x, const Tensor& h,
                      const Tensor& c, std::int64_t hidden) {
  Tensor gates = add_rowvec(add(gates_x, matmul(h, p.wh)), p.b);
  Tensor i = sigmoid(slice_cols(gates, 0, hidden));
  Tensor f = sigmoid(slice_cols(gates, hidden, 2 * hidden));
  Tensor g = tanh_act(slice_cols(gates, 2 * hidden, 3 * hidden));
  Tensor o = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
  Tensor c_next = add(mul(f, c), mul(i, g));
  Tensor h_next = mul(o, tanh_act(c_next));
  return {h_next, c_next};
}

/// Runs a direction over the frame rows in the given order; returns the
/// final hidden state [1 x H].
Tensor run_lstm_final(const LstmParams& p, const Tensor& frames, bool reverse,
                      std::int64_t hidden) {
  const std::int64_t steps = frames.rows();
  Tensor gates_all = matmul(frames, p.wx);  // [T x 4H]
  Tensor h = Tensor::zeros({1, hidden});
  Tensor c = Tensor::zeros({1, hidden});
  for (std::int64_t s = 0; s < steps; ++s) {
    const std::int64_t t = reverse ? steps - 1 - s : s;
    auto out = lstm_step(p, row(gates_all, t), h, c, hidden);
    h = out.h;
    c = out.c;
  }
  return h;
}

}  // namespace

JointEmbedder JointEmbedder::init(std::int64_t hidden, Rng& rng) {
  if (hidden < 1) throw ConfigError("JointEmbedder::init: hidden must be >= 1");
  JointEmbedder m;
  m.hidden = hidden;
  m.enc_fwd = lstm_init(kFeatureDim, hidden, rng);
  m.enc_bwd = lstm_init(kFeatureDim, hidden, rng);
  m.proj1_w = linear_init({2 * hidden, hidden}, rng);
  m.proj1_b = Tensor::zeros({hidden}, true);
  m.proj2_w = linear_init({hidden, hidden}, rng);
  m.proj2_b = Tensor::zeros({hidden}, true);
  m.dec = lstm_init(hidden, hidden, rng);
  m.out_w = linear_init({hidden, kFeatureDim}, rng);
  m.out_b = Tensor::zeros({kFeatureDim}, true);
  return m;
}

std::vector<Tensor> JointEmbedder::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> JointEmbedder::named_parameters() const {
  return {
      {"enc_fwd.wx", enc_fwd.wx}, {"enc_fwd.wh", enc_fwd.wh}, {"enc_fwd.b", enc_fwd.b},
      {"enc_bwd.wx", enc_bwd.wx}, {"enc_bwd.wh", enc_bwd.wh}, {"enc_bwd.b", enc_bwd.b},
      {"proj1_w", proj1_w},       {"proj1_b", proj1_b},       {"proj2_w", proj2_w},
      {"proj2_b", proj2_b},       {"dec.wx", dec.wx},         {"dec.wh", dec.wh},
      {"dec.b", dec.b},           {"out_w", out_w},           {"out_b", out_b},
  };
}

Tensor JointEmbedder::encode(const Tensor& frames) const {
  if (frames.rank() != 2 || frames.cols() != kFeatureDim) {
    throw ShapeError("JointEmbedder::encode: frames must be [T x " +
                     std::to_string(kFeatureDim) + "], got " +
                     shape_str(frames.shape()));
  }
  Tensor fwd = run_lstm_final(enc_fwd, frames, false, hidden);
  Tensor bwd = run_lstm_final(enc_bwd, frames, true, hidden);
  Tensor summary = concat_cols(fwd, bwd);  // [1 x 2H]
  Tensor z = tanh_act(add_rowvec(matmul(summary, proj1_w), proj1_b));
  return add_rowvec(matmul(z, proj2_w), proj2_b);  // [1 x H]
}

Tensor JointEmbedder::decode(const Tensor& z, std::int64_t num_frames) const {
  if (num_frames < 1) throw ContractError("JointEmbedder::decode: T must be >= 1");
  if (z.rank() != 2 || z.rows() != 1 || z.cols() != hidden) {
    throw ShapeError("JointEmbedder::decode: z must be [1 x H]");
  }
  Tensor gates_z = matmul(z, dec.wx);  // same per-step input
  Tensor h = z;                        // z conditions the initial state
  Tensor c = Tensor::zeros({1, hidden});
  std::vector<Tensor> outputs;
  outputs.reserve(num_frames);
  for (std::int64_t t = 0; t < num_frames; ++t) {
    auto out = lstm_step(dec, gates_z, h, c, hidden);
    h = out.h;
    c = out.c;
    outputs.push_back(h);
  }
  Tensor stacked = concat_rows(outputs);  // [T x H]
  return add_rowvec(matmul(stacked, out_w), out_b);
}

JointEmbedding encode_audio(const JointEmbedder& model, const AudioWord& word) {
  if (word.num_frames < 1) throw ContractError("encode_audio: empty audio word");
  if (static_cast<std::int64_t>(word.frames.size()) != word.num_frames * kFeatureDim) {
    throw ShapeError("encode_audio: frame buffer does not match " +
                     std::to_string(kFeatureDim) + "-dim layout");
  }
  Tensor frames = Tensor::from_data({word.num_frames, kFeatureDim}, word.frames);
  Tensor z = model.encode(frames);
  return {z.data(), word.token_label};
}

std::vector<double> decode_audio(const JointEmbedder& model,
                                 std::span<const double> z, std::int64_t num_frames) {
  Tensor zt = Tensor::from_data({1, static_cast<std::int64_t>(z.size())},
                                std::vector<double>(z.begin(), z.end()));
  return model.decode(zt, num_frames).data();
}

Tensor reconstruction_loss(const Tensor& x, const Tensor& y) {
  return squared_error(x, y);
}

Tensor l1_anchor_loss(const Tensor& z, std::int64_t token, const Tensor& emb,
                      bool freeze_emb) {
  if (token < 0 || token >= emb.rows()) {
    throw IndexError("l1_anchor_loss: token " + std::to_string(token) +
                     " outside embedding table of " + std::to_string(emb.rows()));
  }
  const std::array<std::int64_t, 1> idx{token};
  Tensor anchor = gather_rows(emb, idx);
  if (freeze_emb) anchor = anchor.detached();
  if (!same_shape(z.shape(), anchor.shape())) anchor = reshape(anchor, z.shape());
  return l1_loss(z, anchor);
}

void train_joint_embedding(JointEmbedder& model,
                           const std::vector<const AudioWord*>& words,
                           const TextEncoderModel& text_model,
                           const JointTrainConfig& cfg, std::uint64_t seed,
                           JointTrainTrace* trace) {
  if (words.empty()) throw ContractError("train_joint_embedding: empty corpus");
  for (const auto* w : words) {
    if (w->token_label < 0 || w->token_label >= text_model.dims.vocab_size) {
      throw DataError("train_joint_embedding: label " +
                      std::to_string(w->token_label) + " outside vocabulary");
    }
  }
  auto params = model.parameters();
  AdamState adam(params, cfg.adam);
  Rng rng(derive_seed(seed, "joint-embed"));
  if (trace) trace->batch_size = cfg.batch_size;

  std::vector<std::size_t> order(words.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double sum_recons = 0.0, sum_l1 = 0.0;
    std::int64_t items = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Tensor recons_total, l1_total;
      for (std::size_t k = start; k < stop; ++k) {
        const AudioWord& w = *words[order[k]];
        Tensor frames = Tensor::from_data({w.num_frames, kFeatureDim}, w.frames);
        Tensor z = model.encode(frames);
        Tensor y = model.decode(z, w.num_frames);
        Tensor recons = reconstruction_loss(frames, y);
        Tensor anchor = l1_anchor_loss(z, w.token_label, text_model.emb);
        recons_total = recons_total.defined() ? add(recons_total, recons) : recons;
        l1_total = l1_total.defined() ? add(l1_total, anchor) : anchor;
      }
      // Batched losses sum over the words of the batch.
      Tensor loss = add(recons_total, scale(l1_total, cfg.lambda_l1));
      for (auto& p : params) p.zero_grad();
      backward(loss);
      adam_step(params, adam);
      sum_recons += recons_total.scalar_value();
      sum_l1 += l1_total.scalar_value();
      items += static_cast<std::int64_t>(stop - start);
    }
    if (trace) {
      trace->epoch_mean_recons.push_back(sum_recons / static_cast<double>(items));
      trace->epoch_mean_l1.push_back(sum_l1 / static_cast<double>(items));
    }
  }
}

std::vector<JointEmbedding> embed_utterance(const JointEmbedder& model,
                                            const SpokenPassage& passage,
                                            BoundarySource source) {
  std::vector<JointEmbedding> out;
  if (source == BoundarySource::kTrue) {
    out.reserve(passage.words.size());
    for (const auto& w : passage.words) out.push_back(encode_audio(model, w));
    return out;
  }
  if (!passage.channel_applied) {
    throw DataError("embed_utterance: ASR boundaries requested but the channel "
                    "was never applied");
  }
  const auto frames = passage.all_frames();
  out.reserve(passage.asr_boundaries.size());
  for (std::size_t i = 0; i < passage.asr_boundaries.size(); ++i) {
    const FrameSpan& span = passage.asr_boundaries[i];
    AudioWord word;
    word.num_frames = span.length();
    word.token_label = passage.asr_tokens[i];
    word.frame_offset = span.start;
    word.frames.assign(frames.begin() + span.start * kFeatureDim,
                       frames.begin() + span.end * kFeatureDim);
    out.push_back(encode_audio(model, word));
  }
  return out;
}

}  // namespace sqa
