#include "sqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "sqa/error.hpp"
#include "sqa/speech_bert.hpp"

namespace sqa {

int exact_match(std::span<const std::int64_t> pred,
                std::span<const std::int64_t> gold) {
  if (pred.size() != gold.size()) return 0;
  return std::equal(pred.begin(), pred.end(), gold.begin()) ? 1 : 0;
}

double token_f1(std::span<const std::int64_t> pred,
                std::span<const std::int64_t> gold) {
  if (gold.empty()) throw ContractError("token_f1: empty gold");
  if (pred.empty()) return 0.0;
  std::map<std::int64_t, std::int64_t> gold_counts;
  for (auto t : gold) gold_counts[t] += 1;
  std::int64_t overlap = 0;
  for (auto t : pred) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      it->second -= 1;
      overlap += 1;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

std::int64_t span_intersection(FrameSpan a, FrameSpan b) {
  const std::int64_t lo = std::max(a.start, b.start);
  const std::int64_t hi = std::min(a.end, b.end);
  return std::max<std::int64_t>(0, hi - lo);
}

}  // namespace

double frame_f1(FrameSpan pred, FrameSpan gold) {
  if (gold.length() <= 0) throw ContractError("frame_f1: degenerate gold span");
  if (pred.length() <= 0) return 0.0;
  const std::int64_t inter = span_intersection(pred, gold);
  if (inter == 0) return 0.0;
  const double precision = static_cast<double>(inter) / static_cast<double>(pred.length());
  const double recall = static_cast<double>(inter) / static_cast<double>(gold.length());
  return 2.0 * precision * recall / (precision + recall);
}

double aos(FrameSpan pred, FrameSpan gold) {
  if (gold.length() <= 0) throw ContractError("aos: degenerate gold span");
  if (pred.length() <= 0) return 0.0;
  const std::int64_t inter = span_intersection(pred, gold);
  const std::int64_t uni = pred.length() + gold.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::pair<std::int64_t, std::int64_t> ensemble_predict(
    const SpanScores& e2e, const SpanScores& cascade,
    std::span<const std::int64_t> cascade_to_audio, std::int64_t max_span_len) {
  if (cascade_to_audio.empty()) throw DataError("ensemble_predict: empty alignment");
  const std::int64_t n = static_cast<std::int64_t>(e2e.start_dist.size());
  if (n == 0) throw ContractError("ensemble_predict: empty e2e distributions");
  if (cascade_to_audio.size() != cascade.start_dist.size()) {
    throw DataError("ensemble_predict: alignment length does not match cascade");
  }

  constexpr double kFloor = 1e-9;
  std::vector<double> cas_start(n, std::log(kFloor)), cas_end(n, std::log(kFloor));
  for (std::size_t p = 0; p < cascade_to_audio.size(); ++p) {
    const std::int64_t a = cascade_to_audio[p];
    if (a < 0 || a >= n) {
      throw DataError("ensemble_predict: alignment target out of range");
    }
    cas_start[a] = std::log(std::max(cascade.start_dist[p], kFloor));
    cas_end[a] = std::log(std::max(cascade.end_dist[p], kFloor));
  }

  std::vector<double> start_score(n), end_score(n);
  for (std::int64_t i = 0; i < n; ++i) {
    start_score[i] =
        0.5 * (std::log(std::max(e2e.start_dist[i], kFloor)) + cas_start[i]);
    end_score[i] = 0.5 * (std::log(std::max(e2e.end_dist[i], kFloor)) + cas_end[i]);
  }
  // select_span expects probabilities; exponentiation is monotone so the
  // decoded pair is the argmax of the combined log scores.
  std::vector<double> sp(n), ep(n);
  for (std::int64_t i = 0; i < n; ++i) {
    sp[i] = std::exp(start_score[i]);
    ep[i] = std::exp(end_score[i]);
  }
  return select_span(sp, ep, max_span_len);
}

namespace {

std::string fmt_metric(const std::optional<double>& v) {
  if (!v.has_value()) return "";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << *v;
  return os.str();
}

struct Accum {
  double sum = 0.0;
  std::int64_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

}  // namespace

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "kind,name,system,count,em,token_f1,frame_f1,aos\n";
  for (const auto& s : subsets) {
    os << "subset," << s.subset << "," << s.system << "," << s.count << ","
       << fmt_metric(s.em) << "," << fmt_metric(s.token_f1) << ","
       << fmt_metric(s.frame_f1) << "," << fmt_metric(s.aos) << "\n";
  }
  for (const auto& b : buckets) {
    std::ostringstream name;
    name.precision(2);
    name << std::fixed << "wer[" << b.lo << "-" << b.hi << ")";
    os << "bucket," << name.str() << "," << b.system << "," << b.count << ",,,"
       << fmt_metric(b.frame_f1) << ",\n";
  }
  return os.str();
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "subset            system          count      EM  tokenF1  frameF1      AOS\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v.has_value()) return std::string("       -");
    std::ostringstream c;
    c.precision(4);
    c << std::fixed << *v;
    std::string s = c.str();
    return std::string(8 - std::min<std::size_t>(8, s.size()), ' ') + s;
  };
  for (const auto& s : subsets) {
    std::ostringstream line;
    line << s.subset;
    std::string sub = line.str();
    sub.resize(18, ' ');
    std::string sys = s.system;
    sys.resize(16, ' ');
    os << sub << sys;
    std::string cnt = std::to_string(s.count);
    os << std::string(5 - std::min<std::size_t>(5, cnt.size()), ' ') << cnt;
    os << cell(s.em) << cell(s.token_f1) << cell(s.frame_f1) << cell(s.aos) << "\n";
  }
  for (const auto& b : buckets) {
    std::ostringstream name;
    name.precision(2);
    name << std::fixed << "wer[" << b.lo << "-" << b.hi << ")";
    std::string sub = name.str();
    sub.resize(18, ' ');
    std::string sys = b.system;
    sys.resize(16, ' ');
    os << sub << sys;
    std::string cnt = std::to_string(b.count);
    os << std::string(5 - std::min<std::size_t>(5, cnt.size()), ' ') << cnt;
    os << "       -" << "       -" << cell(b.frame_f1) << "       -" << "\n";
  }
  return os.str();
}

namespace {

const EvalPrediction* find_prediction(const SystemPredictions& sys,
                                      std::int64_t example_id) {
  for (const auto& p : sys.predictions) {
    if (p.example_id == example_id) return &p;
  }
  return nullptr;
}

}  // namespace

MetricsReport evaluate_run(const std::vector<EvalGold>& golds,
                           const std::vector<SystemPredictions>& systems) {
  MetricsReport report;
  for (const auto& sys : systems) {
    std::unordered_map<std::int64_t, const EvalPrediction*> by_id;
    by_id.reserve(sys.predictions.size());
    for (const auto& p : sys.predictions) by_id[p.example_id] = &p;

    std::string missing;
    for (const auto& g : golds) {
      if (!by_id.count(g.example_id)) {
        if (!missing.empty()) missing += ", ";
        missing += std::to_string(g.example_id);
      }
    }
    if (!missing.empty()) {
      throw DataError("evaluate_run: system '" + sys.system +
                      "' missing predictions for examples: " + missing);
    }

    Accum clean_em, clean_tf1, clean_ff1, clean_aos;
    Accum lost_ff1, lost_aos;
    Accum total_ff1, total_aos;
    std::int64_t clean_n = 0, lost_n = 0;
    for (const auto& g : golds) {
      const EvalPrediction& p = *by_id.at(g.example_id);
      const double ff1 = frame_f1(p.frames, g.answer_frames);
      const double ao = aos(p.frames, g.answer_frames);
      total_ff1.add(ff1);
      total_aos.add(ao);
      if (g.lost) {
        ++lost_n;
        lost_ff1.add(ff1);
        lost_aos.add(ao);
      } else {
        ++clean_n;
        clean_em.add(static_cast<double>(exact_match(p.tokens, g.answer_tokens)));
        clean_tf1.add(token_f1(p.tokens, g.answer_tokens));
        clean_ff1.add(ff1);
        clean_aos.add(ao);
      }
    }
    report.subsets.push_back({"clean", sys.system, clean_n, clean_em.mean(),
                              clean_tf1.mean(), clean_ff1.mean(), clean_aos.mean()});
    report.subsets.push_back({"lost", sys.system, lost_n, std::nullopt, std::nullopt,
                              lost_ff1.mean(), lost_aos.mean()});
    report.subsets.push_back({"total", sys.system,
                              static_cast<std::int64_t>(golds.size()), std::nullopt,
                              std::nullopt, total_ff1.mean(), total_aos.mean()});
  }
  return report;
}

void bucket_by_wer(const std::vector<EvalGold>& golds,
                   const std::vector<SystemPredictions>& systems,
                   std::span<const double> bucket_edges, MetricsReport& report) {
  if (bucket_edges.size() < 2) throw ContractError("bucket_by_wer: need >= 2 edges");
  for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
    if (bucket_edges[i] <= bucket_edges[i - 1]) {
      throw ContractError("bucket_by_wer: edges must be strictly increasing");
    }
  }
  const std::size_t nb = bucket_edges.size() - 1;
  for (const auto& sys : systems) {
    std::unordered_map<std::int64_t, const EvalPrediction*> by_id;
    for (const auto& p : sys.predictions) by_id[p.example_id] = &p;
    std::vector<Accum> acc(nb);
    for (const auto& g : golds) {
      auto it = by_id.find(g.example_id);
      if (it == by_id.end()) {
        throw DataError("bucket_by_wer: missing prediction for example " +
                        std::to_string(g.example_id));
      }
      // Half-open buckets; the last bucket also takes the top edge.
      std::size_t b = nb;  // sentinel: outside all buckets
      for (std::size_t k = 0; k < nb; ++k) {
        const bool last = (k == nb - 1);
        if (g.passage_wer >= bucket_edges[k] &&
            (g.passage_wer < bucket_edges[k + 1] ||
             (last && g.passage_wer == bucket_edges[k + 1]))) {
          b = k;
          break;
        }
      }
      if (b == nb) continue;
      acc[b].add(frame_f1(it->second->frames, g.answer_frames));
    }
    for (std::size_t k = 0; k < nb; ++k) {
      report.buckets.push_back(
          {bucket_edges[k], bucket_edges[k + 1], sys.system, acc[k].n, acc[k].mean()});
    }
  }
}

}  // namespace sqa
