#include "sqa/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sqa/checkpoint.hpp"
#include "sqa/dataset_io.hpp"
#include "sqa/error.hpp"

namespace sqa {

namespace {

using nlohmann::json;

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void require_file(const std::string& path, const std::string& run_first) {
  if (!file_exists(path)) {
    throw DependencyError("missing prerequisite " + path + "; run " + run_first +
                          " first");
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw FormatError("write failed: " + path);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace_csv(const std::string& path, const TrainTrace& trace) {
  std::string out = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < trace.epoch_mean_loss.size(); ++e) {
    out += std::to_string(e) + "," + fmt17(trace.epoch_mean_loss[e]) + "\n";
  }
  write_text_file(path, out);
}

void write_joint_trace_csv(const std::string& path, const JointTrainTrace& trace) {
  std::string out = "epoch,mean_recons,mean_l1,batch_size\n";
  for (std::size_t e = 0; e < trace.epoch_mean_recons.size(); ++e) {
    out += std::to_string(e) + "," + fmt17(trace.epoch_mean_recons[e]) + "," +
           fmt17(trace.epoch_mean_l1[e]) + "," + std::to_string(trace.batch_size) +
           "\n";
  }
  write_text_file(path, out);
}

QaDataset load_main_dataset(const RunConfig& cfg, const RunPaths& paths) {
  require_file(paths.dataset_jsonl(), "gen-data");
  require_file(paths.dataset_features(), "gen-data");
  return load_dataset(paths.dataset_jsonl(), paths.dataset_features(), cfg.hash());
}

LoadedCheckpoint load_ckpt_checked(const std::string& path, const RunConfig& cfg,
                                   const std::string& expected_stage,
                                   const std::string& run_first) {
  require_file(path, run_first);
  LoadedCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.header.stage != expected_stage) {
    throw FormatError("checkpoint " + path + " was written by stage '" +
                      ckpt.header.stage + "', expected '" + expected_stage + "'");
  }
  if (ckpt.header.config_hash != cfg.hash()) {
    throw DependencyError("checkpoint " + path +
                          " is stale (config changed); rerun " + run_first);
  }
  return ckpt;
}

std::vector<std::vector<std::int64_t>> text_corpus(const QaDataset& ds,
                                                   bool test_split) {
  std::vector<std::vector<std::int64_t>> out;
  for (const auto& ex : ds.examples) {
    if (ex.is_test != test_split) continue;
    out.push_back(ds.passages[ex.passage_id].true_tokens);
    out.push_back(ex.question);
  }
  return out;
}

}  // namespace

TextEncoderModel load_text_encoder_model(const std::string& path, const RunConfig& cfg,
                                         const std::string& expected_stage) {
  const std::string run_first =
      expected_stage == "pretrain-text" ? "pretrain-text" : "pretrain-speechbert";
  LoadedCheckpoint ckpt = load_ckpt_checked(path, cfg, expected_stage, run_first);
  Rng rng(0);
  TextEncoderModel model = TextEncoderModel::init(cfg.model_dims(), rng);
  assign_named_parameters(model.named_parameters(), ckpt);
  return model;
}

JointEmbedder load_joint_embedder_model(const std::string& path, const RunConfig& cfg) {
  LoadedCheckpoint ckpt =
      load_ckpt_checked(path, cfg, "train-joint-embed", "train-joint-embed");
  Rng rng(0);
  JointEmbedder model = JointEmbedder::init(cfg.hidden_dim, rng);
  assign_named_parameters(model.named_parameters(), ckpt);
  return model;
}

SpeechBertModel load_qa_model(const std::string& path, const RunConfig& cfg) {
  const std::string stage = cfg.skip_mlm ? "finetune-qa-skip-mlm" : "finetune-qa";
  LoadedCheckpoint ckpt = load_ckpt_checked(path, cfg, stage, "finetune-qa");
  Rng rng(0);
  SpeechBertModel model = SpeechBertModel::init(cfg.model_dims(), rng);
  assign_named_parameters(model.named_parameters(), ckpt);
  return model;
}

CascadeModel load_cascade_model(const std::string& path, const RunConfig& cfg) {
  LoadedCheckpoint ckpt = load_ckpt_checked(path, cfg, "train-cascade", "train-cascade");
  Rng rng(0);
  CascadeModel model =
      CascadeModel::from_encoder(TextEncoderModel::init(cfg.model_dims(), rng), rng);
  assign_named_parameters(model.named_parameters(), ckpt);
  return model;
}

void run_gen_data(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = generate_qa_dataset(cfg.gen_config(), derive_seed(cfg.seed, "gen-data"));
  save_dataset(ds, paths.dataset_jsonl(), paths.dataset_features(), cfg.hash());
  if (cfg.curve_examples > 0) {
    QaDataset curve =
        generate_qa_dataset(cfg.curve_gen_config(), derive_seed(cfg.seed, "gen-curve"));
    save_dataset(curve, paths.curve_jsonl(), paths.curve_features(), cfg.hash());
  }
}

void run_pretrain_text(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = load_main_dataset(cfg, paths);
  const auto sequences = text_corpus(ds, /*test_split=*/false);
  Rng init_rng(derive_seed(cfg.seed, "init-text-encoder"));
  TextEncoderModel model = TextEncoderModel::init(cfg.model_dims(), init_rng);
  TextPretrainConfig pcfg;
  pcfg.epochs = cfg.text_mlm_epochs;
  pcfg.batch_size = cfg.batch_size;
  pcfg.masking_rate = cfg.masking_rate;
  pcfg.scheme = cfg.masking();
  pcfg.adam = cfg.adam_config();
  TrainTrace trace;
  pretrain_text(model, sequences, ds.vocab, pcfg, cfg.seed, &trace);
  save_checkpoint(paths.text_encoder_ckpt(),
                  {kCheckpointVersion, "pretrain-text", cfg.hash(), cfg.seed},
                  model.named_parameters());
  write_trace_csv(paths.trace_csv("text_mlm"), trace);
}

void run_train_joint_embed(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = load_main_dataset(cfg, paths);
  TextEncoderModel text_model =
      load_text_encoder_model(paths.text_encoder_ckpt(), cfg, "pretrain-text");

  std::vector<const AudioWord*> words;
  for (const auto& ex : ds.examples) {
    if (ex.is_test) continue;
    for (const auto& w : ds.passages[ex.passage_id].words) words.push_back(&w);
  }
  // Seeded subsample down to the training budget.
  Rng sub_rng(derive_seed(cfg.seed, "joint-subsample"));
  for (std::size_t i = words.size(); i > 1; --i) {
    std::swap(words[i - 1],
              words[static_cast<std::size_t>(
                  sub_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  if (static_cast<std::int64_t>(words.size()) > cfg.joint_train_words) {
    words.resize(cfg.joint_train_words);
  }

  Rng init_rng(derive_seed(cfg.seed, "init-joint"));
  JointEmbedder model = JointEmbedder::init(cfg.hidden_dim, init_rng);
  JointTrainConfig jcfg;
  jcfg.epochs = cfg.joint_epochs;
  jcfg.batch_size = cfg.joint_batch_size;
  jcfg.lambda_l1 = cfg.lambda_l1;
  jcfg.adam = cfg.adam_config();
  JointTrainTrace trace;
  train_joint_embedding(model, words, text_model, jcfg, cfg.seed, &trace);
  save_checkpoint(paths.joint_embedder_ckpt(),
                  {kCheckpointVersion, "train-joint-embed", cfg.hash(), cfg.seed},
                  model.named_parameters());
  write_joint_trace_csv(paths.trace_csv("joint"), trace);
}

void run_pretrain_speechbert(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = load_main_dataset(cfg, paths);
  TextEncoderModel encoder =
      load_text_encoder_model(paths.text_encoder_ckpt(), cfg, "pretrain-text");
  JointEmbedder joint = load_joint_embedder_model(paths.joint_embedder_ckpt(), cfg);

  std::vector<MixedItem> items;
  for (const auto& ex : ds.examples) {
    if (ex.is_test) continue;
    const auto& passage = ds.passages[ex.passage_id];
    items.emplace_back(TextItem{passage.true_tokens});
    items.emplace_back(TextItem{ex.question});
    items.emplace_back(
        AudioItem{embed_utterance(joint, passage, BoundarySource::kTrue)});
  }
  Rng head_rng(derive_seed(cfg.seed, "qa-head"));
  SpeechBertModel model = SpeechBertModel::from_encoder(std::move(encoder), head_rng);
  MixedPretrainConfig mcfg;
  mcfg.epochs = cfg.speechbert_mlm_epochs;
  mcfg.batch_size = cfg.batch_size;
  mcfg.masking_rate = cfg.masking_rate;
  mcfg.scheme = cfg.masking();
  mcfg.adam = cfg.adam_config();
  TrainTrace trace;
  pretrain_speechbert(model, ds.vocab, items, mcfg, cfg.seed, &trace);
  save_checkpoint(paths.speech_bert_ckpt(),
                  {kCheckpointVersion, "pretrain-speechbert", cfg.hash(), cfg.seed},
                  model.encoder.named_parameters());
  write_trace_csv(paths.trace_csv("mixed_mlm"), trace);
}

void run_finetune_qa(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = load_main_dataset(cfg, paths);
  JointEmbedder joint = load_joint_embedder_model(paths.joint_embedder_ckpt(), cfg);

  TextEncoderModel encoder = [&] {
    if (cfg.skip_mlm) {
      return load_text_encoder_model(paths.text_encoder_ckpt(), cfg, "pretrain-text");
    }
    if (!file_exists(paths.speech_bert_ckpt())) {
      throw DependencyError(
          "missing prerequisite " + paths.speech_bert_ckpt() +
          "; run pretrain-speechbert first (or pass --skip-mlm to fine-tune "
          "without the mixed MLM stage)");
    }
    return load_text_encoder_model(paths.speech_bert_ckpt(), cfg,
                                   "pretrain-speechbert");
  }();

  Rng head_rng(derive_seed(cfg.seed, "qa-head"));
  SpeechBertModel model = SpeechBertModel::from_encoder(std::move(encoder), head_rng);

  std::vector<QaTrainExample> train;
  for (const auto& ex : ds.examples) {
    if (ex.is_test) continue;
    QaTrainExample t;
    t.question = ex.question;
    t.context = embed_utterance(joint, ds.passages[ex.passage_id], BoundarySource::kTrue);
    t.gold_start = ex.answer_start_word;
    t.gold_end = ex.answer_end_word;
    train.push_back(std::move(t));
  }
  FinetuneConfig fcfg;
  fcfg.epochs = cfg.finetune_epochs;
  fcfg.batch_size = cfg.batch_size;
  fcfg.adam = cfg.adam_config();
  TrainTrace trace;
  finetune_qa(model, train, fcfg, cfg.seed, &trace);
  const std::string stage = cfg.skip_mlm ? "finetune-qa-skip-mlm" : "finetune-qa";
  save_checkpoint(paths.qa_model_ckpt(cfg.skip_mlm),
                  {kCheckpointVersion, stage, cfg.hash(), cfg.seed},
                  model.named_parameters());
  write_trace_csv(paths.trace_csv(cfg.skip_mlm ? "finetune_nomlm" : "finetune"), trace);
}

void run_train_cascade(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = load_main_dataset(cfg, paths);
  TextEncoderModel encoder =
      load_text_encoder_model(paths.text_encoder_ckpt(), cfg, "pretrain-text");
  Rng head_rng(derive_seed(cfg.seed, "cascade-head"));
  CascadeModel model = CascadeModel::from_encoder(std::move(encoder), head_rng);

  std::vector<CascadeTrainExample> train;
  for (const auto& ex : ds.examples) {
    if (ex.is_test || ex.lost) continue;  // lost answers have no transcript span
    CascadeTrainExample t;
    t.question = ex.question;
    t.context = ds.passages[ex.passage_id].asr_tokens;
    t.gold_start = ex.asr_answer_span->first;
    t.gold_end = ex.asr_answer_span->second;
    train.push_back(std::move(t));
  }
  FinetuneConfig fcfg;
  fcfg.epochs = cfg.cascade_epochs;
  fcfg.batch_size = cfg.batch_size;
  fcfg.adam = cfg.adam_config();
  TrainTrace trace;
  train_cascade(model, train, fcfg, cfg.seed, &trace);
  save_checkpoint(paths.cascade_ckpt(),
                  {kCheckpointVersion, "train-cascade", cfg.hash(), cfg.seed},
                  model.named_parameters());
  write_trace_csv(paths.trace_csv("cascade"), trace);
}

std::vector<PredictionRecord> predict_e2e(const SpeechBertModel& model,
                                          const JointEmbedder& joint,
                                          const QaDataset& dataset,
                                          BoundarySource source,
                                          std::int64_t max_span_len, bool test_only) {
  std::vector<PredictionRecord> out;
  for (const auto& ex : dataset.examples) {
    if (test_only && !ex.is_test) continue;
    const auto& passage = dataset.passages[ex.passage_id];
    auto context = embed_utterance(joint, passage, source);
    QaInput input = assemble_qa_input(model.encoder, ex.question, context);
    QaForwardOut fwd = qa_forward(model, input);
    PredictionRecord rec;
    rec.example_id = ex.id;
    rec.start_dist = fwd.start_dist;
    rec.end_dist = fwd.end_dist;
    rec.span = select_span(fwd.start_dist, fwd.end_dist, max_span_len);
    const auto& tokens = source == BoundarySource::kAsr ? passage.asr_tokens
                                                        : passage.true_tokens;
    const auto& bounds = source == BoundarySource::kAsr ? passage.asr_boundaries
                                                        : passage.true_boundaries;
    for (std::int64_t k = rec.span.first; k <= rec.span.second; ++k) {
      rec.tokens.push_back(tokens[k]);
    }
    rec.frames = span_tokens_to_frames(rec.span, bounds);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<PredictionRecord> predict_cascade(const CascadeModel& model,
                                              const QaDataset& dataset,
                                              std::int64_t max_span_len,
                                              bool test_only) {
  std::vector<PredictionRecord> out;
  for (const auto& ex : dataset.examples) {
    if (test_only && !ex.is_test) continue;
    const auto& passage = dataset.passages[ex.passage_id];
    CascadePrediction pred =
        cascade_predict(model, ex.question, passage.asr_tokens, max_span_len);
    PredictionRecord rec;
    rec.example_id = ex.id;
    rec.start_dist = std::move(pred.start_dist);
    rec.end_dist = std::move(pred.end_dist);
    rec.span = pred.span;
    for (std::int64_t k = rec.span.first; k <= rec.span.second; ++k) {
      rec.tokens.push_back(passage.asr_tokens[k]);
    }
    rec.frames = span_tokens_to_frames(rec.span, passage.asr_boundaries);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<EvalGold> build_eval_golds(const QaDataset& dataset, bool test_only) {
  std::vector<EvalGold> out;
  for (const auto& ex : dataset.examples) {
    if (test_only && !ex.is_test) continue;
    const auto& passage = dataset.passages[ex.passage_id];
    EvalGold g;
    g.example_id = ex.id;
    for (std::int64_t k = ex.answer_start_word; k <= ex.answer_end_word; ++k) {
      g.answer_tokens.push_back(passage.true_tokens[k]);
    }
    g.answer_frames = ex.answer_frame_span;
    g.lost = ex.lost;
    g.passage_wer = passage.wer;
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

void write_predictions_jsonl(const std::string& path,
                             const std::vector<PredictionRecord>& preds) {
  std::string out;
  for (const auto& p : preds) {
    json rec;
    rec["example_id"] = p.example_id;
    rec["start_dist"] = p.start_dist;
    rec["end_dist"] = p.end_dist;
    rec["span"] = json::array({p.span.first, p.span.second});
    rec["tokens"] = p.tokens;
    rec["frame_span"] = json::array({p.frames.start, p.frames.end});
    out += rec.dump();
    out += "\n";
  }
  write_text_file(path, out);
}

SystemPredictions to_system(const std::string& name,
                            const std::vector<PredictionRecord>& preds) {
  SystemPredictions sys;
  sys.system = name;
  sys.predictions.reserve(preds.size());
  for (const auto& p : preds) {
    sys.predictions.push_back({p.example_id, p.tokens, p.frames});
  }
  return sys;
}

}  // namespace

MetricsReport run_eval(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = load_main_dataset(cfg, paths);
  JointEmbedder joint = load_joint_embedder_model(paths.joint_embedder_ckpt(), cfg);
  SpeechBertModel qa = load_qa_model(paths.qa_model_ckpt(cfg.skip_mlm), cfg);
  const BoundarySource source = cfg.boundary_source == "true" ? BoundarySource::kTrue
                                                              : BoundarySource::kAsr;
  const std::string variant =
      cfg.boundary_source + (cfg.skip_mlm ? "_nomlm" : "");

  auto golds = build_eval_golds(ds);
  auto e2e = predict_e2e(qa, joint, ds, source, cfg.max_span_len);
  write_predictions_jsonl(paths.predictions_jsonl("e2e_" + variant), e2e);

  std::vector<SystemPredictions> systems;
  systems.push_back(to_system("e2e", e2e));
  if (file_exists(paths.cascade_ckpt())) {
    CascadeModel cascade = load_cascade_model(paths.cascade_ckpt(), cfg);
    auto cas = predict_cascade(cascade, ds, cfg.max_span_len);
    write_predictions_jsonl(paths.predictions_jsonl("cascade"), cas);
    systems.push_back(to_system("cascade", cas));
  }
  MetricsReport report = evaluate_run(golds, systems);
  write_text_file(paths.metrics_csv(variant), report.to_csv());
  write_text_file(paths.metrics_txt(variant), report.to_text());
  return report;
}

MetricsReport run_ensemble_eval(const RunConfig& cfg, const RunPaths& paths) {
  QaDataset ds = load_main_dataset(cfg, paths);
  JointEmbedder joint = load_joint_embedder_model(paths.joint_embedder_ckpt(), cfg);
  RunConfig mlm_cfg = cfg;
  mlm_cfg.skip_mlm = false;  // the ensemble pairs the full end-to-end system
  SpeechBertModel qa = load_qa_model(paths.qa_model_ckpt(false), mlm_cfg);
  CascadeModel cascade = load_cascade_model(paths.cascade_ckpt(), cfg);

  auto golds = build_eval_golds(ds);
  auto e2e = predict_e2e(qa, joint, ds, BoundarySource::kAsr, cfg.max_span_len);
  auto cas = predict_cascade(cascade, ds, cfg.max_span_len);

  std::vector<PredictionRecord> ens;
  ens.reserve(e2e.size());
  for (std::size_t i = 0; i < e2e.size(); ++i) {
    const auto& ex = ds.examples[e2e[i].example_id];
    const auto& passage = ds.passages[ex.passage_id];
    // Both systems share the ASR segmentation, so the alignment is identity.
    std::vector<std::int64_t> alignment(passage.asr_tokens.size());
    for (std::size_t k = 0; k < alignment.size(); ++k) {
      alignment[k] = static_cast<std::int64_t>(k);
    }
    SpanScores e2e_scores{e2e[i].start_dist, e2e[i].end_dist};
    SpanScores cas_scores{cas[i].start_dist, cas[i].end_dist};
    const auto span =
        ensemble_predict(e2e_scores, cas_scores, alignment, cfg.max_span_len);
    PredictionRecord rec;
    rec.example_id = e2e[i].example_id;
    rec.span = span;
    for (std::int64_t k = span.first; k <= span.second; ++k) {
      rec.tokens.push_back(passage.asr_tokens[k]);
    }
    rec.frames = span_tokens_to_frames(span, passage.asr_boundaries);
    ens.push_back(std::move(rec));
  }
  write_predictions_jsonl(paths.predictions_jsonl("ensemble"), ens);

  std::vector<SystemPredictions> systems;
  systems.push_back(to_system("e2e", e2e));
  systems.push_back(to_system("cascade", cas));
  systems.push_back(to_system("ensemble", ens));
  MetricsReport report = evaluate_run(golds, systems);
  write_text_file(paths.metrics_csv("ensemble"), report.to_csv());
  write_text_file(paths.metrics_txt("ensemble"), report.to_text());
  return report;
}

MetricsReport run_wer_curve(const RunConfig& cfg, const RunPaths& paths) {
  require_file(paths.curve_jsonl(), "gen-data");
  require_file(paths.curve_features(), "gen-data");
  QaDataset curve = load_dataset(paths.curve_jsonl(), paths.curve_features(), cfg.hash());
  JointEmbedder joint = load_joint_embedder_model(paths.joint_embedder_ckpt(), cfg);
  RunConfig mlm_cfg = cfg;
  mlm_cfg.skip_mlm = false;
  SpeechBertModel qa = load_qa_model(paths.qa_model_ckpt(false), mlm_cfg);
  CascadeModel cascade = load_cascade_model(paths.cascade_ckpt(), cfg);

  auto golds = build_eval_golds(curve);
  auto e2e = predict_e2e(qa, joint, curve, BoundarySource::kAsr, cfg.max_span_len);
  auto cas = predict_cascade(cascade, curve, cfg.max_span_len);

  std::vector<SystemPredictions> systems;
  systems.push_back(to_system("cascade", cas));
  systems.push_back(to_system("e2e", e2e));
  MetricsReport report;
  bucket_by_wer(golds, systems, cfg.wer_bucket_edges, report);

  // Fig.5-style CSV: one row per bucket, both systems side by side.
  const std::size_t nb = cfg.wer_bucket_edges.size() - 1;
  std::string csv = "wer_mid,cascade_frame_f1,e2e_frame_f1,count\n";
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& cas_row = report.buckets[b];
    const auto& e2e_row = report.buckets[nb + b];
    const double mid = 0.5 * (cas_row.lo + cas_row.hi);
    csv += fmt17(mid);
    csv += ",";
    csv += cas_row.frame_f1 ? fmt17(*cas_row.frame_f1) : "";
    csv += ",";
    csv += e2e_row.frame_f1 ? fmt17(*e2e_row.frame_f1) : "";
    csv += ",";
    csv += std::to_string(cas_row.count);
    csv += "\n";
  }
  write_text_file(paths.wer_curve_csv(), csv);
  return report;
}

int run_pipeline(const std::string& subcommand, const RunConfig& cfg,
                 const std::string& out_dir) {
  RunPaths paths{out_dir};
  std::filesystem::create_directories(out_dir);
  write_text_file(paths.config_echo(), cfg.serialize());

  if (subcommand == "gen-data") {
    run_gen_data(cfg, paths);
  } else if (subcommand == "pretrain-text") {
    run_pretrain_text(cfg, paths);
  } else if (subcommand == "train-joint-embed") {
    run_train_joint_embed(cfg, paths);
  } else if (subcommand == "pretrain-speechbert") {
    run_pretrain_speechbert(cfg, paths);
  } else if (subcommand == "finetune-qa") {
    run_finetune_qa(cfg, paths);
  } else if (subcommand == "train-cascade") {
    run_train_cascade(cfg, paths);
  } else if (subcommand == "eval") {
    run_eval(cfg, paths);
  } else if (subcommand == "ensemble-eval") {
    run_ensemble_eval(cfg, paths);
  } else if (subcommand == "wer-curve") {
    run_wer_curve(cfg, paths);
  } else {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  return 0;
}

}  // namespace sqa
