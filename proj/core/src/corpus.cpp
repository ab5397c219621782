#include "sqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "sqa/error.hpp"

namespace sqa {

std::int64_t SpokenPassage::total_frames() const {
  std::int64_t total = 0;
  for (const auto& w : words) total += w.num_frames;
  return total;
}

std::vector<double> SpokenPassage::all_frames() const {
  std::vector<double> out;
  out.reserve(total_frames() * kFeatureDim);
  for (const auto& w : words) out.insert(out.end(), w.frames.begin(), w.frames.end());
  return out;
}

AudioWord synthesize_audio_word(const Vocabulary& vocab, std::int64_t token,
                                std::uint64_t seed, const SynthParams& params) {
  if (!vocab.is_content(token)) {
    throw ContractError("synthesize_audio_word: token " + std::to_string(token) +
                        " is not a content token");
  }
  if (params.dur_min < 1 || params.dur_min > params.dur_max) {
    throw ConfigError("synthesize_audio_word: invalid duration range");
  }
  Rng rng(derive_seed(seed, "audio-word", static_cast<std::uint64_t>(token)));
  const auto& proto = vocab.prototype(token);
  const std::int64_t plen = vocab.proto_len;
  const std::int64_t dur = rng.uniform_int(params.dur_min, params.dur_max);

  AudioWord word;
  word.token_label = token;
  word.num_frames = dur;
  word.frames.resize(dur * kFeatureDim);
  for (std::int64_t t = 0; t < dur; ++t) {
    // Linear time warp of the prototype onto the sampled duration.
    const double pos = (dur == 1) ? 0.0
                                  : static_cast<double>(t) * (plen - 1) /
                                        static_cast<double>(dur - 1);
    const std::int64_t lo =
        std::min<std::int64_t>(plen - 2, static_cast<std::int64_t>(pos));
    const double frac = pos - static_cast<double>(lo);
    for (std::int64_t d = 0; d < kFeatureDim; ++d) {
      double v = (1.0 - frac) * proto[lo * kFeatureDim + d] +
                 frac * proto[(lo + 1) * kFeatureDim + d];
      if (params.sigma > 0.0) v += rng.normal(0.0, params.sigma);
      word.frames[t * kFeatureDim + d] = static_cast<float>(v);
    }
  }
  return word;
}

SpokenPassage synthesize_passage(const Vocabulary& vocab,
                                 std::span<const std::int64_t> tokens,
                                 std::uint64_t seed, const SynthParams& params) {
  if (tokens.empty()) throw ContractError("synthesize_passage: empty token list");
  SpokenPassage passage;
  passage.words.reserve(tokens.size());
  passage.true_tokens.assign(tokens.begin(), tokens.end());
  std::int64_t offset = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    AudioWord w = synthesize_audio_word(vocab, tokens[i],
                                        derive_seed(seed, "passage-word", i), params);
    w.frame_offset = offset;
    passage.true_boundaries.push_back({offset, offset + w.num_frames});
    offset += w.num_frames;
    passage.words.push_back(std::move(w));
  }
  return passage;
}

double compute_wer(std::span<const std::int64_t> ref,
                   std::span<const std::int64_t> hyp) {
  if (ref.empty()) throw ContractError("compute_wer: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::int64_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int64_t subst = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({subst, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

namespace {

enum class Action { kKeep, kSub, kDel, kIns };

std::int64_t sample_confusable(const Vocabulary& vocab, std::int64_t token, Rng& rng) {
  const auto& list = vocab.confusables_of(token);
  // Geometric rank preference: nearest neighbors substitute most often.
  std::size_t r = 0;
  while (r + 1 < list.size() && rng.uniform() < 0.5) ++r;
  return list[r];
}

}  // namespace

void apply_asr_channel(const Vocabulary& vocab, SpokenPassage& passage,
                       double target_wer, std::uint64_t seed,
                       const ChannelParams& params) {
  if (target_wer < 0.0 || target_wer > 0.8) {
    throw ConfigError("apply_asr_channel: target_wer " + std::to_string(target_wer) +
                      " outside [0, 0.8]");
  }
  const double mass = params.sub_frac + params.del_frac + params.ins_frac;
  if (mass <= 0.0) throw ConfigError("apply_asr_channel: error mass is zero");
  const double p_sub = target_wer * params.sub_frac / mass;
  const double p_del = target_wer * params.del_frac / mass;
  const double p_ins = target_wer * params.ins_frac / mass;

  Rng rng(derive_seed(seed, "asr-channel"));
  const std::int64_t n = static_cast<std::int64_t>(passage.words.size());
  const std::int64_t total = passage.total_frames();

  std::vector<Action> actions(n, Action::kKeep);
  std::int64_t survivors = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u < p_sub) {
      actions[i] = Action::kSub;
    } else if (u < p_sub + p_del) {
      actions[i] = Action::kDel;
    } else if (u < p_sub + p_del + p_ins) {
      actions[i] = Action::kIns;
    }
    if (actions[i] != Action::kDel) ++survivors;
  }
  if (survivors == 0) {
    actions[n - 1] = Action::kKeep;  // never empty the transcript
  }

  // Jitter the interior cut points, keeping them strictly increasing so every
  // interval keeps at least one frame.
  std::vector<std::int64_t> cuts(n + 1);
  cuts[0] = 0;
  cuts[n] = total;
  for (std::int64_t i = 1; i < n; ++i) {
    std::int64_t c = passage.true_boundaries[i].start +
                     rng.uniform_int(-params.jitter, params.jitter);
    c = std::max(c, cuts[i - 1] + 1);
    c = std::min(c, total - (n - i));
    cuts[i] = c;
  }

  struct OutTok {
    std::int64_t token;
    FrameSpan span;
    std::int64_t src;
  };
  std::vector<OutTok> out;
  out.reserve(n + 2);
  std::int64_t pending_start = -1;
  for (std::int64_t i = 0; i < n; ++i) {
    FrameSpan span{cuts[i], cuts[i + 1]};
    if (pending_start >= 0) {
      span.start = pending_start;
      pending_start = -1;
    }
    switch (actions[i]) {
      case Action::kDel:
        if (!out.empty()) {
          out.back().span.end = span.end;
        } else {
          pending_start = span.start;
        }
        break;
      case Action::kSub:
        out.push_back({sample_confusable(vocab, passage.true_tokens[i], rng), span, i});
        break;
      case Action::kKeep:
        out.push_back({passage.true_tokens[i], span, i});
        break;
      case Action::kIns: {
        if (span.length() >= 2) {
          const std::int64_t mid = span.start + span.length() / 2;
          out.push_back({passage.true_tokens[i], {span.start, mid}, i});
          out.push_back(
              {sample_confusable(vocab, passage.true_tokens[i], rng), {mid, span.end}, -1});
        } else {
          out.push_back({passage.true_tokens[i], span, i});
        }
        break;
      }
    }
  }

  passage.asr_tokens.clear();
  passage.asr_boundaries.clear();
  passage.asr_alignment.clear();
  for (const auto& t : out) {
    passage.asr_tokens.push_back(t.token);
    passage.asr_boundaries.push_back(t.span);
    passage.asr_alignment.push_back(t.src);
  }
  passage.target_wer = target_wer;
  passage.wer = compute_wer(passage.true_tokens, passage.asr_tokens);
  passage.channel_applied = true;
}

namespace {

std::vector<std::int64_t> sample_passage_tokens(const Vocabulary& vocab,
                                                std::int64_t length, Rng& rng) {
  std::unordered_set<std::int64_t> used;
  std::vector<std::int64_t> tokens;
  tokens.reserve(length);
  std::int64_t t =
      vocab.content_token(rng.uniform_int(0, vocab.num_content - 1));
  tokens.push_back(t);
  used.insert(t);
  for (std::int64_t k = 1; k < length; ++k) {
    std::vector<std::int64_t> candidates;
    for (auto s : vocab.successors_of(t)) {
      if (!used.count(s)) candidates.push_back(s);
    }
    if (!candidates.empty()) {
      t = candidates[rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1)];
    } else {
      do {
        t = vocab.content_token(rng.uniform_int(0, vocab.num_content - 1));
      } while (used.count(t));
    }
    tokens.push_back(t);
    used.insert(t);
  }
  return tokens;
}

}  // namespace

QaDataset generate_qa_dataset(const GenConfig& config, std::uint64_t seed) {
  if (config.num_examples < 1) {
    throw ConfigError("generate_qa_dataset: num_examples must be >= 1");
  }
  if (config.passage_len_min > config.passage_len_max) {
    throw ConfigError("generate_qa_dataset: passage length range is empty");
  }
  if (config.passage_len_min < config.answer_len_max + 2) {
    throw ConfigError(
        "generate_qa_dataset: passages too short for answers with context "
        "(need passage_len_min >= answer_len_max + 2)");
  }
  if (config.passage_len_max > config.num_content_tokens) {
    throw ConfigError("generate_qa_dataset: passages longer than the vocabulary");
  }
  if (config.wer_targets.empty()) {
    throw ConfigError("generate_qa_dataset: no WER targets");
  }
  for (double w : config.wer_targets) {
    if (w < 0.0 || w > 0.8) {
      throw ConfigError("generate_qa_dataset: wer target outside [0, 0.8]");
    }
  }
  if (config.test_fraction < 0.0 || config.test_fraction > 1.0) {
    throw ConfigError("generate_qa_dataset: test_fraction outside [0, 1]");
  }

  QaDataset ds;
  ds.seed = seed;
  ds.gen = config;
  ds.vocab = build_vocabulary(config.num_content_tokens, derive_seed(seed, "vocab"),
                              config.vocab);

  ds.passages.reserve(config.num_examples);
  ds.examples.reserve(config.num_examples);
  for (std::int64_t i = 0; i < config.num_examples; ++i) {
    Rng rng(derive_seed(seed, "example", i));
    const std::int64_t len =
        rng.uniform_int(config.passage_len_min, config.passage_len_max);
    const auto tokens = sample_passage_tokens(ds.vocab, len, rng);

    SpokenPassage passage = synthesize_passage(
        ds.vocab, tokens, derive_seed(seed, "passage", i), config.synth);
    const double target =
        config.wer_targets[rng.uniform_int(
            0, static_cast<std::int64_t>(config.wer_targets.size()) - 1)];
    apply_asr_channel(ds.vocab, passage, target, derive_seed(seed, "channel", i),
                      config.channel);

    QAExample ex;
    ex.id = i;
    ex.passage_id = i;
    const std::int64_t max_alen =
        std::min<std::int64_t>(config.answer_len_max, len - 2);
    const std::int64_t alen = rng.uniform_int(1, max_alen);
    ex.answer_start_word = rng.uniform_int(1, len - 1 - alen);
    ex.answer_end_word = ex.answer_start_word + alen - 1;
    ex.question = {ds.vocab.marker_token(), tokens[ex.answer_start_word - 1],
                   tokens[ex.answer_end_word + 1]};
    ex.answer_frame_span = {passage.true_boundaries[ex.answer_start_word].start,
                            passage.true_boundaries[ex.answer_end_word].end};

    // The answer survives iff every answer word kept its token and the
    // aligned ASR positions are contiguous (no insertion inside, no deletion).
    std::vector<std::int64_t> positions;
    bool verbatim = true;
    for (std::size_t p = 0; p < passage.asr_alignment.size(); ++p) {
      const std::int64_t src = passage.asr_alignment[p];
      if (src >= ex.answer_start_word && src <= ex.answer_end_word) {
        positions.push_back(static_cast<std::int64_t>(p));
        if (passage.asr_tokens[p] != passage.true_tokens[src]) verbatim = false;
      }
    }
    if (static_cast<std::int64_t>(positions.size()) != alen) verbatim = false;
    if (verbatim && positions.back() - positions.front() + 1 != alen) verbatim = false;
    ex.lost = !verbatim;
    if (!ex.lost) {
      ex.asr_answer_span = {positions.front(), positions.back()};
    }
    ex.is_test = rng.uniform() < config.test_fraction;

    ds.passages.push_back(std::move(passage));
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace sqa
