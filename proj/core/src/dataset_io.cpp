#include "sqa/dataset_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sqa/error.hpp"

namespace sqa {

namespace {

using nlohmann::json;

json spans_to_json(const std::vector<FrameSpan>& spans) {
  json out = json::array();
  for (const auto& s : spans) out.push_back(json::array({s.start, s.end}));
  return out;
}

std::vector<FrameSpan> spans_from_json(const json& j) {
  std::vector<FrameSpan> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    out.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>()});
  }
  return out;
}

void write_f32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 4);
}

float read_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_dataset(const QaDataset& dataset, const std::string& jsonl_path,
                  const std::string& features_path, std::uint64_t config_hash) {
  std::ofstream meta(jsonl_path, std::ios::binary | std::ios::trunc);
  if (!meta) throw FormatError("save_dataset: cannot open " + jsonl_path);
  std::ofstream feats(features_path, std::ios::binary | std::ios::trunc);
  if (!feats) throw FormatError("save_dataset: cannot open " + features_path);

  std::int64_t total_frames = 0;
  for (const auto& p : dataset.passages) total_frames += p.total_frames();

  json header;
  header["type"] = "header";
  header["format_version"] = 1;
  header["config_hash"] = config_hash;
  header["seed"] = dataset.seed;
  header["num_content"] = dataset.vocab.num_content;
  header["vocab_seed"] = dataset.vocab.build_seed;
  header["proto_len"] = dataset.gen.vocab.proto_len;
  header["cluster_size"] = dataset.gen.vocab.cluster_size;
  header["cluster_spread"] = dataset.gen.vocab.cluster_spread;
  header["confusable_k"] = dataset.gen.vocab.confusable_k;
  header["num_successors"] = dataset.gen.vocab.num_successors;
  header["num_passages"] = dataset.passages.size();
  header["num_examples"] = dataset.examples.size();
  header["total_frames"] = total_frames;
  header["feature_dim"] = kFeatureDim;
  meta << header.dump() << "\n";

  std::int64_t offset = 0;
  for (std::size_t i = 0; i < dataset.passages.size(); ++i) {
    const auto& p = dataset.passages[i];
    json rec;
    rec["type"] = "passage";
    rec["id"] = i;
    rec["true_tokens"] = p.true_tokens;
    rec["true_boundaries"] = spans_to_json(p.true_boundaries);
    rec["asr_tokens"] = p.asr_tokens;
    rec["asr_boundaries"] = spans_to_json(p.asr_boundaries);
    rec["asr_alignment"] = p.asr_alignment;
    rec["wer"] = p.wer;
    rec["target_wer"] = p.target_wer;
    rec["feature_offset"] = offset;
    rec["num_frames"] = p.total_frames();
    meta << rec.dump() << "\n";
    offset += p.total_frames();
    for (const auto& w : p.words) {
      for (double v : w.frames) write_f32(feats, static_cast<float>(v));
    }
  }

  for (const auto& ex : dataset.examples) {
    json rec;
    rec["type"] = "example";
    rec["id"] = ex.id;
    rec["passage_id"] = ex.passage_id;
    rec["question"] = ex.question;
    rec["answer_word_span"] = json::array({ex.answer_start_word, ex.answer_end_word});
    rec["answer_frame_span"] =
        json::array({ex.answer_frame_span.start, ex.answer_frame_span.end});
    rec["lost"] = ex.lost;
    if (ex.asr_answer_span.has_value()) {
      rec["asr_answer_span"] =
          json::array({ex.asr_answer_span->first, ex.asr_answer_span->second});
    } else {
      rec["asr_answer_span"] = nullptr;
    }
    rec["split"] = ex.is_test ? "test" : "train";
    meta << rec.dump() << "\n";
  }
  if (!meta || !feats) throw FormatError("save_dataset: write failed");
}

QaDataset load_dataset(const std::string& jsonl_path, const std::string& features_path,
                       std::uint64_t expected_config_hash) {
  std::ifstream meta(jsonl_path, std::ios::binary);
  if (!meta) throw FormatError("load_dataset: cannot open " + jsonl_path);
  std::ifstream feats(features_path, std::ios::binary);
  if (!feats) throw FormatError("load_dataset: cannot open " + features_path);
  std::string feat_bytes((std::istreambuf_iterator<char>(feats)),
                         std::istreambuf_iterator<char>());

  std::string line;
  if (!std::getline(meta, line)) throw FormatError("load_dataset: empty metadata");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("load_dataset: bad header: ") + e.what());
  }
  if (header.value("type", "") != "header") {
    throw FormatError("load_dataset: first record is not a header");
  }
  if (header.value("format_version", -1) != 1) {
    throw FormatError("load_dataset: unsupported format version");
  }
  const std::uint64_t stored_hash = header.value("config_hash", std::uint64_t{0});
  if (expected_config_hash != 0 && stored_hash != expected_config_hash) {
    throw DependencyError(
        "dataset was generated under a different config; run gen-data first");
  }

  QaDataset ds;
  ds.seed = header.value("seed", std::uint64_t{0});
  ds.gen.vocab.proto_len = header.value("proto_len", std::int64_t{12});
  ds.gen.vocab.cluster_size = header.value("cluster_size", std::int64_t{4});
  ds.gen.vocab.cluster_spread = header.value("cluster_spread", 0.5);
  ds.gen.vocab.confusable_k = header.value("confusable_k", std::int64_t{8});
  ds.gen.vocab.num_successors = header.value("num_successors", std::int64_t{3});
  ds.gen.num_content_tokens = header.at("num_content").get<std::int64_t>();
  ds.vocab = build_vocabulary(ds.gen.num_content_tokens,
                              header.at("vocab_seed").get<std::uint64_t>(),
                              ds.gen.vocab);
  const std::int64_t total_frames = header.at("total_frames").get<std::int64_t>();
  if (static_cast<std::int64_t>(feat_bytes.size()) != total_frames * kFeatureDim * 4) {
    throw FormatError("load_dataset: feature file has " +
                      std::to_string(feat_bytes.size()) + " bytes, expected " +
                      std::to_string(total_frames * kFeatureDim * 4));
  }

  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(std::string("load_dataset: bad record: ") + e.what());
    }
    const std::string type = rec.value("type", "");
    if (type == "passage") {
      SpokenPassage p;
      p.true_tokens = rec.at("true_tokens").get<std::vector<std::int64_t>>();
      p.true_boundaries = spans_from_json(rec.at("true_boundaries"));
      p.asr_tokens = rec.at("asr_tokens").get<std::vector<std::int64_t>>();
      p.asr_boundaries = spans_from_json(rec.at("asr_boundaries"));
      p.asr_alignment = rec.at("asr_alignment").get<std::vector<std::int64_t>>();
      p.wer = rec.at("wer").get<double>();
      p.target_wer = rec.at("target_wer").get<double>();
      p.channel_applied = true;
      const std::int64_t base = rec.at("feature_offset").get<std::int64_t>();
      const std::int64_t frames = rec.at("num_frames").get<std::int64_t>();
      if ((base + frames) * kFeatureDim * 4 >
          static_cast<std::int64_t>(feat_bytes.size())) {
        throw FormatError("load_dataset: passage features out of range");
      }
      if (p.true_tokens.size() != p.true_boundaries.size()) {
        throw FormatError("load_dataset: boundary count mismatch");
      }
      p.words.reserve(p.true_tokens.size());
      for (std::size_t w = 0; w < p.true_tokens.size(); ++w) {
        AudioWord word;
        word.token_label = p.true_tokens[w];
        word.frame_offset = p.true_boundaries[w].start;
        word.num_frames = p.true_boundaries[w].length();
        word.frames.resize(word.num_frames * kFeatureDim);
        const char* src =
            feat_bytes.data() + (base + word.frame_offset) * kFeatureDim * 4;
        for (std::int64_t k = 0; k < word.num_frames * kFeatureDim; ++k) {
          word.frames[k] = read_f32(src + k * 4);
        }
        p.words.push_back(std::move(word));
      }
      ds.passages.push_back(std::move(p));
    } else if (type == "example") {
      QAExample ex;
      ex.id = rec.at("id").get<std::int64_t>();
      ex.passage_id = rec.at("passage_id").get<std::int64_t>();
      ex.question = rec.at("question").get<std::vector<std::int64_t>>();
      ex.answer_start_word = rec.at("answer_word_span").at(0).get<std::int64_t>();
      ex.answer_end_word = rec.at("answer_word_span").at(1).get<std::int64_t>();
      ex.answer_frame_span = {rec.at("answer_frame_span").at(0).get<std::int64_t>(),
                              rec.at("answer_frame_span").at(1).get<std::int64_t>()};
      ex.lost = rec.at("lost").get<bool>();
      if (!rec.at("asr_answer_span").is_null()) {
        ex.asr_answer_span = {rec.at("asr_answer_span").at(0).get<std::int64_t>(),
                              rec.at("asr_answer_span").at(1).get<std::int64_t>()};
      }
      ex.is_test = rec.value("split", "train") == "test";
      ds.examples.push_back(std::move(ex));
    } else {
      throw FormatError("load_dataset: unknown record type '" + type + "'");
    }
  }
  if (ds.passages.size() != header.at("num_passages").get<std::size_t>() ||
      ds.examples.size() != header.at("num_examples").get<std::size_t>()) {
    throw FormatError("load_dataset: record counts do not match the header");
  }
  return ds;
}

}  // namespace sqa
