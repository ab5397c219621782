#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqa/adam.hpp"
#include "sqa/corpus.hpp"
#include "sqa/text_encoder.hpp"

namespace sqa {

/// Every knob of a run. Parsed from a line-based `key = value` file; unknown
/// keys and out-of-range values are rejected.
struct RunConfig {
  std::uint64_t seed = 1;

  // Corpus.
  std::int64_t vocab_size = 100;
  std::int64_t num_examples = 900;
  std::int64_t passage_len_min = 12;
  std::int64_t passage_len_max = 18;
  std::int64_t answer_len_max = 3;
  std::int64_t dur_min = 6;
  std::int64_t dur_max = 18;
  std::int64_t proto_len = 12;
  double sigma = 0.25;
  std::int64_t jitter = 2;
  std::vector<double> wer_targets = {0.25};
  double test_fraction = 0.2;
  double sub_frac = 0.8;
  double del_frac = 0.1;
  double ins_frac = 0.1;
  std::int64_t curve_examples = 900;
  std::vector<double> curve_wer_targets = {0.05, 0.15, 0.25, 0.35, 0.45, 0.55};

  // Model dimensions.
  std::int64_t hidden_dim = 64;
  std::int64_t num_layers = 2;
  std::int64_t num_heads = 2;
  std::int64_t max_seq_len = 128;
  std::int64_t ffn_mult = 4;

  // Stage hyperparameters.
  double masking_rate = 0.15;
  std::string masking_scheme = "mask_only";  // or "bert"
  std::int64_t text_mlm_epochs = 3;
  std::int64_t joint_epochs = 5;
  std::int64_t joint_train_words = 2000;
  std::int64_t joint_batch_size = 16;
  std::int64_t speechbert_mlm_epochs = 3;
  std::int64_t finetune_epochs = 4;
  std::int64_t cascade_epochs = 4;
  std::int64_t batch_size = 8;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda_l1 = 1.0;
  std::int64_t max_span_len = 8;
  std::vector<double> wer_bucket_edges = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0};

  // Runtime flags (not part of the config hash).
  bool skip_mlm = false;
  std::string boundary_source = "asr";  // or "true"

  /// Canonical `key = value` serialization of every field.
  std::string serialize() const;

  /// Hash over everything that affects generated data and trained models.
  std::uint64_t hash() const;

  GenConfig gen_config() const;
  GenConfig curve_gen_config() const;
  ModelDims model_dims() const;
  AdamConfig adam_config() const;
  MaskingScheme masking() const;
};

/// Parses and validates a config file; missing keys keep their defaults, an
/// empty or absent-by-choice file yields all defaults.
RunConfig parse_config(const std::string& text);

/// Reads the file at `path` and parses it.
RunConfig load_config(const std::string& path);

/// Range-checks every field (also called by parse_config).
void validate_config(const RunConfig& cfg);

}  // namespace sqa
