#include "sqa/text_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sqa/error.hpp"

namespace sqa {

namespace {

Tensor linear_init(Shape shape, Rng& rng) {
  // Xavier-uniform for weight matrices.
  const double fan_in = static_cast<double>(shape[0]);
  const double fan_out = static_cast<double>(shape[1]);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  return Tensor::rand_uniform(std::move(shape), rng, -bound, bound, true);
}

}  // namespace

TextEncoderModel TextEncoderModel::init(const ModelDims& dims, Rng& rng) {
  if (dims.vocab_size < 1 || dims.hidden < 1 || dims.heads < 1 ||
      dims.hidden % dims.heads != 0) {
    throw ConfigError("TextEncoderModel::init: invalid dimensions");
  }
  TextEncoderModel m;
  m.dims = dims;
  const std::int64_t h = dims.hidden;
  m.emb = Tensor::randn({dims.vocab_size, h}, rng, 0.1, true);
  m.pos = Tensor::randn({dims.max_seq, h}, rng, 0.1, true);
  m.seg = Tensor::randn({2, h}, rng, 0.1, true);
  for (std::int64_t l = 0; l < dims.layers; ++l) {
    TransformerBlock b;
    b.wq = linear_init({h, h}, rng);
    b.bq = Tensor::zeros({h}, true);
    b.wk = linear_init({h, h}, rng);
    b.bk = Tensor::zeros({h}, true);
    b.wv = linear_init({h, h}, rng);
    b.bv = Tensor::zeros({h}, true);
    b.wo = linear_init({h, h}, rng);
    b.bo = Tensor::zeros({h}, true);
    b.ln1_gain = Tensor::full({h}, 1.0, true);
    b.ln1_bias = Tensor::zeros({h}, true);
    b.ffn_w1 = linear_init({h, h * dims.ffn_mult}, rng);
    b.ffn_b1 = Tensor::zeros({h * dims.ffn_mult}, true);
    b.ffn_w2 = linear_init({h * dims.ffn_mult, h}, rng);
    b.ffn_b2 = Tensor::zeros({h}, true);
    b.ln2_gain = Tensor::full({h}, 1.0, true);
    b.ln2_bias = Tensor::zeros({h}, true);
    m.blocks.push_back(std::move(b));
  }
  m.mlm.transform_w = linear_init({h, h}, rng);
  m.mlm.transform_b = Tensor::zeros({h}, true);
  m.mlm.ln_gain = Tensor::full({h}, 1.0, true);
  m.mlm.ln_bias = Tensor::zeros({h}, true);
  m.mlm.out_bias = Tensor::zeros({dims.vocab_size}, true);
  return m;
}

std::vector<Tensor> TextEncoderModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> TextEncoderModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("emb", emb);
  out.emplace_back("pos", pos);
  out.emplace_back("seg", seg);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    out.emplace_back(p + "attn.wq", b.wq);
    out.emplace_back(p + "attn.bq", b.bq);
    out.emplace_back(p + "attn.wk", b.wk);
    out.emplace_back(p + "attn.bk", b.bk);
    out.emplace_back(p + "attn.wv", b.wv);
    out.emplace_back(p + "attn.bv", b.bv);
    out.emplace_back(p + "attn.wo", b.wo);
    out.emplace_back(p + "attn.bo", b.bo);
    out.emplace_back(p + "ln1.gain", b.ln1_gain);
    out.emplace_back(p + "ln1.bias", b.ln1_bias);
    out.emplace_back(p + "ffn.w1", b.ffn_w1);
    out.emplace_back(p + "ffn.b1", b.ffn_b1);
    out.emplace_back(p + "ffn.w2", b.ffn_w2);
    out.emplace_back(p + "ffn.b2", b.ffn_b2);
    out.emplace_back(p + "ln2.gain", b.ln2_gain);
    out.emplace_back(p + "ln2.bias", b.ln2_bias);
  }
  out.emplace_back("mlm.transform_w", mlm.transform_w);
  out.emplace_back("mlm.transform_b", mlm.transform_b);
  out.emplace_back("mlm.ln_gain", mlm.ln_gain);
  out.emplace_back("mlm.ln_bias", mlm.ln_bias);
  out.emplace_back("mlm.out_bias", mlm.out_bias);
  return out;
}

Tensor TextEncoderModel::embed_tokens(std::span<const std::int64_t> tokens,
                                      std::span<const std::int64_t> segment_ids) const {
  const std::int64_t n = static_cast<std::int64_t>(tokens.size());
  if (n > dims.max_seq) {
    throw LengthError("embed_tokens: sequence of length " + std::to_string(n) +
                      " exceeds max_seq " + std::to_string(dims.max_seq));
  }
  if (segment_ids.size() != tokens.size()) {
    throw ShapeError("embed_tokens: segment_ids length mismatch");
  }
  for (auto s : segment_ids) {
    if (s != 0 && s != 1) {
      throw IndexError("embed_tokens: segment id must be 0 or 1");
    }
  }
  std::vector<std::int64_t> positions(n);
  std::iota(positions.begin(), positions.end(), 0);
  Tensor e = gather_rows(emb, tokens);
  Tensor p = gather_rows(pos, positions);
  Tensor s = gather_rows(seg, segment_ids);
  return add(add(e, p), s);
}

namespace {

Tensor attention(const TransformerBlock& b, const Tensor& x, std::int64_t heads,
                 std::vector<std::vector<double>>* trace_out) {
  const std::int64_t n = x.rows();
  const std::int64_t h = x.cols();
  const std::int64_t dk = h / heads;
  Tensor q = add_rowvec(matmul(x, b.wq), b.bq);
  Tensor k = add_rowvec(matmul(x, b.wk), b.bk);
  Tensor v = add_rowvec(matmul(x, b.wv), b.bv);
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> head_ctx;
  head_ctx.reserve(heads);
  for (std::int64_t head = 0; head < heads; ++head) {
    Tensor qh = slice_cols(q, head * dk, (head + 1) * dk);
    Tensor kh = slice_cols(k, head * dk, (head + 1) * dk);
    Tensor vh = slice_cols(v, head * dk, (head + 1) * dk);
    Tensor scores = scale(matmul(qh, transpose(kh)), scale_factor);
    Tensor attn = softmax(scores, 1);
    if (trace_out) trace_out->push_back(attn.data());
    head_ctx.push_back(matmul(attn, vh));
  }
  Tensor ctx = head_ctx[0];
  for (std::size_t i = 1; i < head_ctx.size(); ++i) {
    ctx = concat_cols(ctx, head_ctx[i]);
  }
  (void)n;
  return add_rowvec(matmul(ctx, b.wo), b.bo);
}

}  // namespace

Tensor TextEncoderModel::encode(const Tensor& embedded, AttnTrace* trace) const {
  Tensor x = embedded;
  for (const auto& b : blocks) {
    std::vector<std::vector<double>>* layer_trace = nullptr;
    if (trace) {
      trace->per_layer_head.emplace_back();
      layer_trace = &trace->per_layer_head.back();
    }
    Tensor attn_out = attention(b, x, dims.heads, layer_trace);
    x = layer_norm_rows(add(x, attn_out), b.ln1_gain, b.ln1_bias);
    Tensor ffn = add_rowvec(
        matmul(gelu(add_rowvec(matmul(x, b.ffn_w1), b.ffn_b1)), b.ffn_w2), b.ffn_b2);
    x = layer_norm_rows(add(x, ffn), b.ln2_gain, b.ln2_bias);
  }
  return x;
}

Tensor TextEncoderModel::mlm_logits(const Tensor& hidden) const {
  Tensor t = gelu(add_rowvec(matmul(hidden, mlm.transform_w), mlm.transform_b));
  t = layer_norm_rows(t, mlm.ln_gain, mlm.ln_bias);
  return add_rowvec(matmul(t, transpose(emb)), mlm.out_bias);
}

MaskedBatch apply_mlm_mask(std::span<const std::int64_t> tokens,
                           const Vocabulary& vocab, double rate, Rng& rng,
                           MaskingScheme scheme) {
  if (rate < 0.0 || rate > 1.0) {
    throw ConfigError("apply_mlm_mask: rate outside [0, 1]");
  }
  std::vector<std::int64_t> maskable;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (vocab.is_content(tokens[i])) maskable.push_back(static_cast<std::int64_t>(i));
  }
  if (maskable.empty()) {
    throw ContractError("apply_mlm_mask: no maskable positions");
  }

  MaskedBatch batch;
  batch.input_tokens.assign(tokens.begin(), tokens.end());
  for (auto i : maskable) {
    if (rng.uniform() < rate) {
      batch.mask_positions.push_back(i);
    }
  }
  if (batch.mask_positions.empty()) {
    batch.mask_positions.push_back(
        maskable[rng.uniform_int(0, static_cast<std::int64_t>(maskable.size()) - 1)]);
  }
  for (auto i : batch.mask_positions) {
    batch.mask_targets.push_back(tokens[i]);
    std::int64_t replacement = Vocabulary::kMask;
    if (scheme == MaskingScheme::kBert) {
      const double u = rng.uniform();
      if (u < 0.8) {
        replacement = Vocabulary::kMask;
      } else if (u < 0.9) {
        replacement =
            vocab.content_token(rng.uniform_int(0, vocab.num_content - 1));
      } else {
        replacement = tokens[i];
      }
    }
    batch.input_tokens[i] = replacement;
  }
  return batch;
}

Tensor mlm_loss(const TextEncoderModel& model, const MaskedBatch& batch) {
  if (batch.mask_positions.empty()) {
    throw ContractError("mlm_loss: batch has no masked positions");
  }
  std::vector<std::int64_t> segs(batch.input_tokens.size(), 0);
  Tensor embedded = model.embed_tokens(batch.input_tokens, segs);
  Tensor hidden = model.encode(embedded);
  Tensor masked_hidden = gather_rows(hidden, batch.mask_positions);
  Tensor logits = model.mlm_logits(masked_hidden);
  return cross_entropy(logits, batch.mask_targets);
}

namespace {

std::vector<std::int64_t> wrap_sequence(const std::vector<std::int64_t>& tokens) {
  std::vector<std::int64_t> out;
  out.reserve(tokens.size() + 2);
  out.push_back(Vocabulary::kCls);
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.push_back(Vocabulary::kSep);
  return out;
}

}  // namespace

void pretrain_text(TextEncoderModel& model,
                   const std::vector<std::vector<std::int64_t>>& sequences,
                   const Vocabulary& vocab, const TextPretrainConfig& cfg,
                   std::uint64_t seed, TrainTrace* trace) {
  if (sequences.empty()) throw ContractError("pretrain_text: empty corpus");
  auto params = model.parameters();
  AdamState adam(params, cfg.adam);
  Rng rng(derive_seed(seed, "pretrain-text"));

  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Seeded shuffle per epoch.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double epoch_loss = 0.0;
    std::int64_t steps = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Tensor batch_loss;
      for (std::size_t k = start; k < stop; ++k) {
        const auto wrapped = wrap_sequence(sequences[order[k]]);
        MaskedBatch mb = apply_mlm_mask(wrapped, vocab, cfg.masking_rate, rng,
                                        cfg.scheme);
        Tensor item_loss = mlm_loss(model, mb);
        batch_loss = batch_loss.defined() ? add(batch_loss, item_loss) : item_loss;
      }
      batch_loss = scale(batch_loss, 1.0 / static_cast<double>(stop - start));
      for (auto& p : params) p.zero_grad();
      backward(batch_loss);
      adam_step(params, adam);
      epoch_loss += batch_loss.scalar_value();
      ++steps;
    }
    if (trace) trace->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(steps));
  }
}

double masked_token_accuracy(const TextEncoderModel& model,
                             const std::vector<std::vector<std::int64_t>>& sequences,
                             const Vocabulary& vocab, double rate, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "masked-accuracy"));
  std::int64_t correct = 0, total = 0;
  for (const auto& seq : sequences) {
    const auto wrapped = wrap_sequence(seq);
    MaskedBatch mb = apply_mlm_mask(wrapped, vocab, rate, rng);
    std::vector<std::int64_t> segs(mb.input_tokens.size(), 0);
    Tensor hidden = model.encode(model.embed_tokens(mb.input_tokens, segs));
    Tensor logits = model.mlm_logits(gather_rows(hidden, mb.mask_positions));
    const std::int64_t v = logits.cols();
    for (std::size_t r = 0; r < mb.mask_targets.size(); ++r) {
      const double* rowp = logits.data().data() + static_cast<std::int64_t>(r) * v;
      const std::int64_t best =
          std::distance(rowp, std::max_element(rowp, rowp + v));
      if (best == mb.mask_targets[r]) ++correct;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace sqa
