#include "sqa/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sqa/error.hpp"

namespace sqa {

namespace {

float quantize(double v) { return static_cast<float>(v); }

/// Piecewise-linear trajectory through a few control frames, plus fine
/// detail, so prototypes have temporal structure a time warp preserves.
std::vector<double> sample_prototype(Rng& rng, std::int64_t proto_len,
                                     const std::vector<double>& center,
                                     double spread) {
  constexpr std::int64_t kControls = 4;
  std::vector<double> controls(kControls * kFeatureDim);
  for (auto& v : controls) v = rng.normal(0.0, spread);

  std::vector<double> proto(proto_len * kFeatureDim);
  for (std::int64_t t = 0; t < proto_len; ++t) {
    const double pos = (proto_len == 1)
                           ? 0.0
                           : static_cast<double>(t) * (kControls - 1) /
                                 static_cast<double>(proto_len - 1);
    const std::int64_t lo = std::min<std::int64_t>(kControls - 2,
                                                   static_cast<std::int64_t>(pos));
    const double frac = pos - static_cast<double>(lo);
    for (std::int64_t d = 0; d < kFeatureDim; ++d) {
      const double offset = (1.0 - frac) * controls[lo * kFeatureDim + d] +
                            frac * controls[(lo + 1) * kFeatureDim + d];
      proto[t * kFeatureDim + d] =
          quantize(center[t * kFeatureDim + d] + offset);
    }
  }
  return proto;
}

double mean_sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

std::vector<std::int64_t> random_permutation(std::int64_t n, Rng& rng) {
  std::vector<std::int64_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::int64_t i = n - 1; i > 0; --i) {
    const std::int64_t j = rng.uniform_int(0, i);
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace

std::int64_t Vocabulary::content_index(std::int64_t token) const {
  if (!is_content(token)) {
    throw IndexError("token " + std::to_string(token) + " is not a content token");
  }
  return token - kNumSpecial;
}

const std::vector<double>& Vocabulary::prototype(std::int64_t token) const {
  return prototypes[content_index(token)];
}

const std::vector<std::int64_t>& Vocabulary::confusables_of(std::int64_t token) const {
  return confusables[content_index(token)];
}

const std::vector<std::int64_t>& Vocabulary::successors_of(std::int64_t token) const {
  return successors[content_index(token)];
}

Vocabulary build_vocabulary(std::int64_t num_content_tokens, std::uint64_t seed,
                            const VocabParams& params) {
  if (num_content_tokens < 10) {
    throw ConfigError("build_vocabulary: need >= 10 content tokens, got " +
                      std::to_string(num_content_tokens));
  }
  if (params.proto_len < 2) {
    throw ConfigError("build_vocabulary: proto_len must be >= 2");
  }

  Vocabulary vocab;
  vocab.num_content = num_content_tokens;
  vocab.proto_len = params.proto_len;
  vocab.build_seed = seed;

  Rng root(seed);
  Rng proto_rng = root.fork("prototypes");

  const std::int64_t num_clusters =
      (num_content_tokens + params.cluster_size - 1) / params.cluster_size;
  std::vector<std::vector<double>> centers(num_clusters);
  for (auto& c : centers) {
    c.resize(params.proto_len * kFeatureDim);
    for (auto& v : c) v = proto_rng.normal(0.0, 1.0);
  }

  vocab.prototypes.reserve(num_content_tokens);
  for (std::int64_t i = 0; i < num_content_tokens; ++i) {
    const auto& center = centers[i / params.cluster_size];
    vocab.prototypes.push_back(
        sample_prototype(proto_rng, params.proto_len, center, params.cluster_spread));
  }

  // Confusability: top-k other content tokens by prototype distance.
  vocab.confusables.resize(num_content_tokens);
  const std::int64_t k =
      std::min<std::int64_t>(params.confusable_k, num_content_tokens - 1);
  for (std::int64_t i = 0; i < num_content_tokens; ++i) {
    std::vector<std::pair<double, std::int64_t>> dists;
    dists.reserve(num_content_tokens - 1);
    for (std::int64_t j = 0; j < num_content_tokens; ++j) {
      if (j == i) continue;
      dists.emplace_back(mean_sq_distance(vocab.prototypes[i], vocab.prototypes[j]),
                         j);
    }
    std::sort(dists.begin(), dists.end());
    auto& list = vocab.confusables[i];
    list.reserve(k);
    for (std::int64_t r = 0; r < k; ++r) {
      list.push_back(vocab.content_token(dists[r].second));
    }
  }

  // Successor structure from independent permutations: every token has
  // num_successors likely followers and appears as a follower equally often.
  Rng succ_rng = root.fork("successors");
  vocab.successors.assign(num_content_tokens, {});
  for (std::int64_t s = 0; s < params.num_successors; ++s) {
    const auto perm = random_permutation(num_content_tokens, succ_rng);
    for (std::int64_t i = 0; i < num_content_tokens; ++i) {
      vocab.successors[i].push_back(vocab.content_token(perm[i]));
    }
  }

  return vocab;
}

}  // namespace sqa
