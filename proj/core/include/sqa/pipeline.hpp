#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqa/cascade.hpp"
#include "sqa/config.hpp"
#include "sqa/corpus.hpp"
#include "sqa/joint_embed.hpp"
#include "sqa/metrics.hpp"
#include "sqa/speech_bert.hpp"

namespace sqa {

/// File layout of one run directory.
struct RunPaths {
  std::string out_dir;

  std::string config_echo() const { return out_dir + "/config.effective.txt"; }
  std::string dataset_jsonl() const { return out_dir + "/dataset.jsonl"; }
  std::string dataset_features() const { return out_dir + "/features.bin"; }
  std::string curve_jsonl() const { return out_dir + "/curve.jsonl"; }
  std::string curve_features() const { return out_dir + "/curve_features.bin"; }
  std::string text_encoder_ckpt() const { return out_dir + "/text_encoder.ckpt"; }
  std::string joint_embedder_ckpt() const { return out_dir + "/joint_embedder.ckpt"; }
  std::string speech_bert_ckpt() const { return out_dir + "/speech_bert.ckpt"; }
  std::string qa_model_ckpt(bool skip_mlm) const {
    return out_dir + (skip_mlm ? "/qa_model_nomlm.ckpt" : "/qa_model.ckpt");
  }
  std::string cascade_ckpt() const { return out_dir + "/cascade.ckpt"; }
  std::string trace_csv(const std::string& stage) const {
    return out_dir + "/trace_" + stage + ".csv";
  }
  std::string predictions_jsonl(const std::string& system) const {
    return out_dir + "/predictions_" + system + ".jsonl";
  }
  std::string metrics_csv(const std::string& variant) const {
    return out_dir + "/metrics_" + variant + ".csv";
  }
  std::string metrics_txt(const std::string& variant) const {
    return out_dir + "/metrics_" + variant + ".txt";
  }
  std::string wer_curve_csv() const { return out_dir + "/wer_curve.csv"; }
};

/// Stage entry points. Each validates its prerequisites (raising
/// DependencyError that names the stage to run first), performs the work,
/// and writes its outputs under the run directory.
void run_gen_data(const RunConfig& cfg, const RunPaths& paths);
void run_pretrain_text(const RunConfig& cfg, const RunPaths& paths);
void run_train_joint_embed(const RunConfig& cfg, const RunPaths& paths);
void run_pretrain_speechbert(const RunConfig& cfg, const RunPaths& paths);
void run_finetune_qa(const RunConfig& cfg, const RunPaths& paths);
void run_train_cascade(const RunConfig& cfg, const RunPaths& paths);
MetricsReport run_eval(const RunConfig& cfg, const RunPaths& paths);
MetricsReport run_ensemble_eval(const RunConfig& cfg, const RunPaths& paths);
MetricsReport run_wer_curve(const RunConfig& cfg, const RunPaths& paths);

/// Dispatches one subcommand; creates the run directory and echoes the
/// effective config. Returns the process exit status.
int run_pipeline(const std::string& subcommand, const RunConfig& cfg,
                 const std::string& out_dir);

/// Loaders shared by the stages and by tests.
TextEncoderModel load_text_encoder_model(const std::string& path, const RunConfig& cfg,
                                         const std::string& expected_stage);
JointEmbedder load_joint_embedder_model(const std::string& path, const RunConfig& cfg);
SpeechBertModel load_qa_model(const std::string& path, const RunConfig& cfg);
CascadeModel load_cascade_model(const std::string& path, const RunConfig& cfg);

/// Per-example prediction record as dumped to the predictions JSONL.
struct PredictionRecord {
  std::int64_t example_id = 0;
  std::vector<double> start_dist;
  std::vector<double> end_dist;
  std::pair<std::int64_t, std::int64_t> span;
  std::vector<std::int64_t> tokens;
  FrameSpan frames;
};

std::vector<PredictionRecord> predict_e2e(const SpeechBertModel& model,
                                          const JointEmbedder& joint,
                                          const QaDataset& dataset,
                                          BoundarySource source,
                                          std::int64_t max_span_len,
                                          bool test_only = true);

std::vector<PredictionRecord> predict_cascade(const CascadeModel& model,
                                              const QaDataset& dataset,
                                              std::int64_t max_span_len,
                                              bool test_only = true);

std::vector<EvalGold> build_eval_golds(const QaDataset& dataset, bool test_only = true);

}  // namespace sqa
