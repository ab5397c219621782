#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sqa {

/// FNV-1a over a byte string. Stable across platforms, used for RNG stream
/// derivation and config hashing.
std::uint64_t stable_hash64(std::string_view bytes);

/// Derives an independent stream seed from a master seed and a label, so that
/// changing one stage's consumption does not perturb another stage.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index);

/// Seeded generator with self-contained distributions. The standard library
/// distributions are implementation-defined, so uniform/normal are
/// implemented here to keep runs reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [lo, hi] inclusive. Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev);

  /// Child stream keyed by a label (and optional index). Children are a
  /// function of this generator's seed, not of its current state, so sibling
  /// streams never interfere.
  Rng fork(std::string_view label) const { return Rng(derive_seed(seed_, label)); }
  Rng fork(std::string_view label, std::uint64_t index) const {
    return Rng(derive_seed(seed_, label, index));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sqa
