#include "sqa/cascade.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <string>

#include "sqa/error.hpp"
#include "sqa/ops.hpp"

namespace sqa {

CascadeModel CascadeModel::from_encoder(TextEncoderModel encoder, Rng& rng) {
  CascadeModel m;
  m.encoder = std::move(encoder);
  m.qa = QAHead::init(m.encoder.dims.hidden, rng);
  return m;
}

std::vector<Tensor> CascadeModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> CascadeModel::named_parameters() const {
  auto out = encoder.named_parameters();
  out.emplace_back("qa.start_vec", qa.start_vec);
  out.emplace_back("qa.end_vec", qa.end_vec);
  return out;
}

namespace {

struct TokenQaForward {
  Tensor start_logits;  // [1 x n]
  Tensor end_logits;
};

TokenQaForward token_qa_forward(const TextEncoderModel& encoder, const QAHead& qa,
                                std::span<const std::int64_t> question,
                                std::span<const std::int64_t> context) {
  if (context.empty()) throw ContractError("cascade: empty context");
  const std::int64_t q = static_cast<std::int64_t>(question.size());
  const std::int64_t n = static_cast<std::int64_t>(context.size());
  std::vector<std::int64_t> tokens;
  tokens.reserve(q + n + 3);
  tokens.push_back(Vocabulary::kCls);
  tokens.insert(tokens.end(), question.begin(), question.end());
  tokens.push_back(Vocabulary::kSep);
  tokens.insert(tokens.end(), context.begin(), context.end());
  tokens.push_back(Vocabulary::kSep);
  std::vector<std::int64_t> segments(tokens.size(), 1);
  for (std::int64_t i = 0; i < q + 2; ++i) segments[i] = 0;

  Tensor hidden = encoder.encode(encoder.embed_tokens(tokens, segments));
  Tensor ctx_hidden = slice_rows(hidden, q + 2, q + 2 + n);
  const std::int64_t h = encoder.dims.hidden;
  TokenQaForward out;
  out.start_logits = transpose(matmul(ctx_hidden, reshape(qa.start_vec, {h, 1})));
  out.end_logits = transpose(matmul(ctx_hidden, reshape(qa.end_vec, {h, 1})));
  return out;
}

}  // namespace

Tensor cascade_loss(const CascadeModel& model, const CascadeTrainExample& example) {
  const std::int64_t n = static_cast<std::int64_t>(example.context.size());
  if (example.gold_start < 0 || example.gold_end < example.gold_start ||
      example.gold_end >= n) {
    throw DataError("cascade_loss: gold span outside the context");
  }
  auto fwd = token_qa_forward(model.encoder, model.qa, example.question,
                              example.context);
  const std::array<std::int64_t, 1> s{example.gold_start};
  const std::array<std::int64_t, 1> e{example.gold_end};
  return add(cross_entropy(fwd.start_logits, s), cross_entropy(fwd.end_logits, e));
}

void train_cascade(CascadeModel& model,
                   const std::vector<CascadeTrainExample>& examples,
                   const FinetuneConfig& cfg, std::uint64_t seed, TrainTrace* trace) {
  if (examples.empty()) {
    throw DataError("train_cascade: no trainable examples (all answers lost?)");
  }
  auto params = model.parameters();
  AdamState adam(params, cfg.adam);
  Rng rng(derive_seed(seed, "train-cascade"));

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
        Tensor loss = cascade_loss(model, examples[order[k]]);
        total = total.defined() ? add(total, loss) : loss;
      }
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

CascadePrediction cascade_predict(const CascadeModel& model,
                                  std::span<const std::int64_t> question,
                                  std::span<const std::int64_t> asr_tokens,
                                  std::int64_t max_span_len) {
  auto fwd = token_qa_forward(model.encoder, model.qa, question, asr_tokens);
  CascadePrediction pred;
  pred.start_dist = softmax(fwd.start_logits, 1).data();
  pred.end_dist = softmax(fwd.end_logits, 1).data();
  pred.span = select_span(pred.start_dist, pred.end_dist, max_span_len);
  return pred;
}

FrameSpan span_tokens_to_frames(std::pair<std::int64_t, std::int64_t> span,
                                std::span<const FrameSpan> boundaries) {
  const std::int64_t n = static_cast<std::int64_t>(boundaries.size());
  if (span.first < 0 || span.second < span.first || span.second >= n) {
    throw IndexError("span_tokens_to_frames: span (" + std::to_string(span.first) +
                     ", " + std::to_string(span.second) + ") outside " +
                     std::to_string(n) + " boundaries");
  }
  return {boundaries[span.first].start, boundaries[span.second].end};
}

}  // namespace sqa
