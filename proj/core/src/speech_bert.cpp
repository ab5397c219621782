#include "sqa/speech_bert.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sqa/error.hpp"
#include "sqa/ops.hpp"

namespace sqa {

QAHead QAHead::init(std::int64_t hidden, Rng& rng) {
  QAHead head;
  head.start_vec = Tensor::randn({hidden}, rng, 0.1, true);
  head.end_vec = Tensor::randn({hidden}, rng, 0.1, true);
  return head;
}

SpeechBertModel SpeechBertModel::init(const ModelDims& dims, Rng& rng) {
  SpeechBertModel m;
  m.encoder = TextEncoderModel::init(dims, rng);
  m.qa = QAHead::init(dims.hidden, rng);
  return m;
}

SpeechBertModel SpeechBertModel::from_encoder(TextEncoderModel encoder, Rng& rng) {
  SpeechBertModel m;
  m.encoder = std::move(encoder);
  m.qa = QAHead::init(m.encoder.dims.hidden, rng);
  return m;
}

std::vector<Tensor> SpeechBertModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> SpeechBertModel::named_parameters() const {
  auto out = encoder.named_parameters();
  out.emplace_back("qa.start_vec", qa.start_vec);
  out.emplace_back("qa.end_vec", qa.end_vec);
  return out;
}

QaInput assemble_qa_input(const TextEncoderModel& model,
                          std::span<const std::int64_t> question,
                          const std::vector<JointEmbedding>& audio) {
  const std::int64_t q = static_cast<std::int64_t>(question.size());
  const std::int64_t n = static_cast<std::int64_t>(audio.size());
  const std::int64_t total = q + n + 3;
  if (total > model.dims.max_seq) {
    throw LengthError("assemble_qa_input: sequence of length " +
                      std::to_string(total) + " exceeds max_seq " +
                      std::to_string(model.dims.max_seq));
  }
  if (n == 0) throw ContractError("assemble_qa_input: empty audio context");
  const std::int64_t h = model.dims.hidden;

  // Text side: [CLS] question [SEP], all segment 0.
  std::vector<std::int64_t> text_tokens;
  text_tokens.reserve(q + 2);
  text_tokens.push_back(Vocabulary::kCls);
  text_tokens.insert(text_tokens.end(), question.begin(), question.end());
  text_tokens.push_back(Vocabulary::kSep);
  Tensor text_emb = gather_rows(model.emb, text_tokens);

  // Audio side: joint embeddings then the trailing [SEP], all segment 1.
  std::vector<double> audio_data;
  audio_data.reserve(n * h);
  for (const auto& e : audio) {
    if (static_cast<std::int64_t>(e.z.size()) != h) {
      throw ShapeError("assemble_qa_input: joint embedding dim " +
                       std::to_string(e.z.size()) + " != hidden " + std::to_string(h));
    }
    audio_data.insert(audio_data.end(), e.z.begin(), e.z.end());
  }
  Tensor audio_emb = Tensor::from_data({n, h}, std::move(audio_data));
  const std::array<std::int64_t, 1> sep{Vocabulary::kSep};
  Tensor tail_sep = gather_rows(model.emb, sep);

  const std::array<Tensor, 3> parts{text_emb, audio_emb, tail_sep};
  Tensor content = concat_rows(parts);

  std::vector<std::int64_t> positions(total);
  std::iota(positions.begin(), positions.end(), 0);
  std::vector<std::int64_t> segments(total, 1);
  for (std::int64_t i = 0; i < q + 2; ++i) segments[i] = 0;

  Tensor embedded = add(add(content, gather_rows(model.pos, positions)),
                        gather_rows(model.seg, segments));
  return {embedded, q + 2, n};
}

QaForwardOut qa_forward(const SpeechBertModel& model, const QaInput& input) {
  Tensor hidden = model.encoder.encode(input.embedded);
  Tensor audio_hidden =
      slice_rows(hidden, input.context_offset, input.context_offset + input.context_len);
  const std::int64_t h = model.encoder.dims.hidden;
  Tensor s_col = reshape(model.qa.start_vec, {h, 1});
  Tensor e_col = reshape(model.qa.end_vec, {h, 1});
  Tensor start_logits = transpose(matmul(audio_hidden, s_col));  // [1 x n]
  Tensor end_logits = transpose(matmul(audio_hidden, e_col));
  QaForwardOut out;
  out.start_logits = start_logits;
  out.end_logits = end_logits;
  out.start_dist = softmax(start_logits, 1).data();
  out.end_dist = softmax(end_logits, 1).data();
  return out;
}

std::pair<std::int64_t, std::int64_t> select_span(std::span<const double> start_dist,
                                                  std::span<const double> end_dist,
                                                  std::int64_t max_span_len) {
  const std::int64_t n = static_cast<std::int64_t>(start_dist.size());
  if (n == 0) throw ContractError("select_span: empty distributions");
  if (static_cast<std::int64_t>(end_dist.size()) != n) {
    throw ShapeError("select_span: distribution lengths differ");
  }
  if (max_span_len < 1) throw ContractError("select_span: max_span_len must be >= 1");

  auto log_or_neg_inf = [](double p) {
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  };
  std::int64_t best_i = 0, best_j = 0;
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::int64_t i = 0; i < n; ++i) {
    const double ls = log_or_neg_inf(start_dist[i]);
    const std::int64_t j_hi = std::min<std::int64_t>(n - 1, i + max_span_len - 1);
    for (std::int64_t j = i; j <= j_hi; ++j) {
      const double score = ls + log_or_neg_inf(end_dist[j]);
      if (!found || score > best) {
        best = score;
        best_i = i;
        best_j = j;
        found = true;
      }
    }
  }
  return {best_i, best_j};
}

namespace {

struct BuiltMixedItem {
  Tensor embedded;                        // [len x H]
  std::vector<std::int64_t> mask_positions;
  std::vector<std::int64_t> mask_targets;
};

BuiltMixedItem build_text_item(const TextEncoderModel& model, const Vocabulary& vocab,
                               const TextItem& item, double rate, Rng& rng,
                               MaskingScheme scheme) {
  std::vector<std::int64_t> wrapped;
  wrapped.reserve(item.tokens.size() + 2);
  wrapped.push_back(Vocabulary::kCls);
  wrapped.insert(wrapped.end(), item.tokens.begin(), item.tokens.end());
  wrapped.push_back(Vocabulary::kSep);
  MaskedBatch mb = apply_mlm_mask(wrapped, vocab, rate, rng, scheme);
  std::vector<std::int64_t> segs(mb.input_tokens.size(), 0);
  return {model.embed_tokens(mb.input_tokens, segs), std::move(mb.mask_positions),
          std::move(mb.mask_targets)};
}

BuiltMixedItem build_audio_item(const TextEncoderModel& model, const Vocabulary& vocab,
                                const AudioItem& item, double rate, Rng& rng) {
  const std::int64_t n = static_cast<std::int64_t>(item.embeddings.size());
  if (n == 0) throw ContractError("mixed_mlm_step: empty audio item");
  const std::int64_t h = model.dims.hidden;
  for (const auto& e : item.embeddings) {
    if (e.token_label < Vocabulary::kNumSpecial ||
        e.token_label >= model.dims.vocab_size) {
      throw DataError("mixed_mlm_step: audio embedding without a valid token label");
    }
  }
  // Select masked audio positions with the same rule as text masking:
  // independent draws at `rate`, at least one forced.
  std::vector<std::int64_t> mask_positions;
  for (std::int64_t i = 0; i < n; ++i) {
    if (rng.uniform() < rate) mask_positions.push_back(i);
  }
  if (mask_positions.empty()) mask_positions.push_back(rng.uniform_int(0, n - 1));

  const std::int64_t total = n + 2;  // [CLS] audio [SEP]
  std::vector<std::int64_t> mask_flags(n, 0);
  std::vector<std::int64_t> targets;
  for (auto p : mask_positions) {
    mask_flags[p] = 1;
    targets.push_back(item.embeddings[p].token_label);
  }

  std::vector<Tensor> rows;
  rows.reserve(total);
  const std::array<std::int64_t, 1> cls{Vocabulary::kCls};
  const std::array<std::int64_t, 1> sep{Vocabulary::kSep};
  const std::array<std::int64_t, 1> mask_tok{Vocabulary::kMask};
  rows.push_back(gather_rows(model.emb, cls));
  for (std::int64_t i = 0; i < n; ++i) {
    if (mask_flags[i]) {
      // Masked spoken word: the MASK token embedding stands in for z.
      rows.push_back(gather_rows(model.emb, mask_tok));
    } else {
      rows.push_back(Tensor::from_data({1, h}, item.embeddings[i].z));
    }
  }
  rows.push_back(gather_rows(model.emb, sep));
  Tensor content = concat_rows(rows);

  std::vector<std::int64_t> positions(total);
  std::iota(positions.begin(), positions.end(), 0);
  std::vector<std::int64_t> segments(total, 1);
  Tensor embedded = add(add(content, gather_rows(model.pos, positions)),
                        gather_rows(model.seg, segments));

  // Positions shift by one for the leading [CLS].
  std::vector<std::int64_t> shifted;
  shifted.reserve(mask_positions.size());
  for (auto p : mask_positions) shifted.push_back(p + 1);
  return {embedded, std::move(shifted), std::move(targets)};
}

}  // namespace

Tensor mixed_mlm_step(const SpeechBertModel& model, const Vocabulary& vocab,
                      std::span<const MixedItem> items, double masking_rate,
                      Rng& rng, MaskingScheme scheme) {
  if (items.empty()) throw ContractError("mixed_mlm_step: empty batch");
  Tensor total;
  for (const auto& item : items) {
    BuiltMixedItem built =
        std::holds_alternative<TextItem>(item)
            ? build_text_item(model.encoder, vocab, std::get<TextItem>(item),
                              masking_rate, rng, scheme)
            : build_audio_item(model.encoder, vocab, std::get<AudioItem>(item),
                               masking_rate, rng);
    Tensor hidden = model.encoder.encode(built.embedded);
    Tensor logits = model.encoder.mlm_logits(gather_rows(hidden, built.mask_positions));
    Tensor loss = cross_entropy(logits, built.mask_targets);
    total = total.defined() ? add(total, loss) : loss;
  }
  return scale(total, 1.0 / static_cast<double>(items.size()));
}

void pretrain_speechbert(SpeechBertModel& model, const Vocabulary& vocab,
                         const std::vector<MixedItem>& items,
                         const MixedPretrainConfig& cfg, std::uint64_t seed,
                         TrainTrace* trace) {
  if (items.empty()) throw ContractError("pretrain_speechbert: empty corpus");
  auto params = model.encoder.parameters();  // QA head untouched by MLM
  AdamState adam(params, cfg.adam);
  Rng rng(derive_seed(seed, "pretrain-speechbert"));

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double epoch_loss = 0.0;
    std::int64_t steps = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<MixedItem> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) batch.push_back(items[order[k]]);
      Tensor loss = mixed_mlm_step(model, vocab, batch, cfg.masking_rate, rng,
                                   cfg.scheme);
      for (auto& p : params) p.zero_grad();
      backward(loss);
      adam_step(params, adam);
      epoch_loss += loss.scalar_value();
      ++steps;
    }
    if (trace) trace->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(steps));
  }
}

double masked_audio_accuracy(const SpeechBertModel& model, const Vocabulary& vocab,
                             const std::vector<AudioItem>& items, double rate,
                             std::uint64_t seed) {
  Rng rng(derive_seed(seed, "masked-audio-accuracy"));
  std::int64_t correct = 0, total = 0;
  for (const auto& item : items) {
    BuiltMixedItem built = build_audio_item(model.encoder, vocab, item, rate, rng);
    Tensor hidden = model.encoder.encode(built.embedded);
    Tensor logits = model.encoder.mlm_logits(gather_rows(hidden, built.mask_positions));
    const std::int64_t v = logits.cols();
    for (std::size_t r = 0; r < built.mask_targets.size(); ++r) {
      const double* rowp = logits.data().data() + static_cast<std::int64_t>(r) * v;
      const std::int64_t best = std::distance(rowp, std::max_element(rowp, rowp + v));
      if (best == built.mask_targets[r]) ++correct;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

Tensor qa_loss(const SpeechBertModel& model, const QaTrainExample& example) {
  const std::int64_t n = static_cast<std::int64_t>(example.context.size());
  if (example.gold_start < 0 || example.gold_end < example.gold_start ||
      example.gold_end >= n) {
    throw DataError("qa_loss: gold span outside the context");
  }
  QaInput input = assemble_qa_input(model.encoder, example.question, example.context);
  QaForwardOut out = qa_forward(model, input);
  const std::array<std::int64_t, 1> s{example.gold_start};
  const std::array<std::int64_t, 1> e{example.gold_end};
  return add(cross_entropy(out.start_logits, s), cross_entropy(out.end_logits, e));
}

void finetune_qa(SpeechBertModel& model, const std::vector<QaTrainExample>& examples,
                 const FinetuneConfig& cfg, std::uint64_t seed, TrainTrace* trace) {
  if (examples.empty()) throw ContractError("finetune_qa: no training examples");
  auto params = model.parameters();
  AdamState adam(params, cfg.adam);
  Rng rng(derive_seed(seed, "finetune-qa"));

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double epoch_loss = 0.0;
    std::int64_t steps = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Tensor total;
      for (std::size_t k = start; k < stop; ++k) {
        Tensor loss = qa_loss(model, examples[order[k]]);
        total = total.defined() ? add(total, loss) : loss;
      }
      // Mean over the batch of summed start/end cross-entropies.
      Tensor loss = scale(total, 1.0 / static_cast<double>(stop - start));
      for (auto& p : params) p.zero_grad();
      backward(loss);
      adam_step(params, adam);
      epoch_loss += loss.scalar_value();
      ++steps;
    }
    if (trace) trace->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(steps));
  }
}

}  // namespace sqa
