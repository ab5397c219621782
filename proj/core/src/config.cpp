#include "sqa/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sqa/error.hpp"
#include "sqa/rng.hpp"

namespace sqa {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(v[i]);
  }
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  const auto* begin = value.data();
  const auto* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* begin = value.data();
  const auto* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" +
                      value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + value + "'");
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value +
                    "'");
}

}  // namespace

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "adam_beta1 = " << fmt_double(adam_beta1) << "\n";
  os << "adam_beta2 = " << fmt_double(adam_beta2) << "\n";
  os << "adam_eps = " << fmt_double(adam_eps) << "\n";
  os << "answer_len_max = " << answer_len_max << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "boundary_source = " << boundary_source << "\n";
  os << "cascade_epochs = " << cascade_epochs << "\n";
  os << "curve_examples = " << curve_examples << "\n";
  os << "curve_wer_targets = " << fmt_list(curve_wer_targets) << "\n";
  os << "del_frac = " << fmt_double(del_frac) << "\n";
  os << "dur_max = " << dur_max << "\n";
  os << "dur_min = " << dur_min << "\n";
  os << "ffn_mult = " << ffn_mult << "\n";
  os << "finetune_epochs = " << finetune_epochs << "\n";
  os << "hidden_dim = " << hidden_dim << "\n";
  os << "ins_frac = " << fmt_double(ins_frac) << "\n";
  os << "jitter = " << jitter << "\n";
  os << "joint_batch_size = " << joint_batch_size << "\n";
  os << "joint_epochs = " << joint_epochs << "\n";
  os << "joint_train_words = " << joint_train_words << "\n";
  os << "lambda_l1 = " << fmt_double(lambda_l1) << "\n";
  os << "lr = " << fmt_double(lr) << "\n";
  os << "masking_rate = " << fmt_double(masking_rate) << "\n";
  os << "masking_scheme = " << masking_scheme << "\n";
  os << "max_seq_len = " << max_seq_len << "\n";
  os << "max_span_len = " << max_span_len << "\n";
  os << "num_examples = " << num_examples << "\n";
  os << "num_heads = " << num_heads << "\n";
  os << "num_layers = " << num_layers << "\n";
  os << "passage_len_max = " << passage_len_max << "\n";
  os << "passage_len_min = " << passage_len_min << "\n";
  os << "proto_len = " << proto_len << "\n";
  os << "seed = " << seed << "\n";
  os << "sigma = " << fmt_double(sigma) << "\n";
  os << "skip_mlm = " << (skip_mlm ? "true" : "false") << "\n";
  os << "speechbert_mlm_epochs = " << speechbert_mlm_epochs << "\n";
  os << "sub_frac = " << fmt_double(sub_frac) << "\n";
  os << "test_fraction = " << fmt_double(test_fraction) << "\n";
  os << "text_mlm_epochs = " << text_mlm_epochs << "\n";
  os << "vocab_size = " << vocab_size << "\n";
  os << "wer_bucket_edges = " << fmt_list(wer_bucket_edges) << "\n";
  os << "wer_targets = " << fmt_list(wer_targets) << "\n";
  return os.str();
}

std::uint64_t RunConfig::hash() const {
  // Every model- and data-relevant field; the eval-time flags skip_mlm and
  // boundary_source stay out so evaluation variants can share checkpoints.
  std::string canon = serialize();
  std::string filtered;
  std::stringstream ss(canon);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind("skip_mlm", 0) == 0) continue;
    if (line.rfind("boundary_source", 0) == 0) continue;
    filtered += line;
    filtered += '\n';
  }
  return stable_hash64(filtered);
}

GenConfig RunConfig::gen_config() const {
  GenConfig g;
  g.num_content_tokens = vocab_size;
  g.num_examples = num_examples;
  g.passage_len_min = passage_len_min;
  g.passage_len_max = passage_len_max;
  g.answer_len_max = answer_len_max;
  g.synth = {dur_min, dur_max, sigma};
  g.channel = {sub_frac, del_frac, ins_frac, jitter};
  g.wer_targets = wer_targets;
  g.test_fraction = test_fraction;
  g.vocab.proto_len = proto_len;
  return g;
}

GenConfig RunConfig::curve_gen_config() const {
  GenConfig g = gen_config();
  g.num_examples = curve_examples;
  g.wer_targets = curve_wer_targets;
  g.test_fraction = 1.0;  // the curve dataset is evaluation-only
  return g;
}

ModelDims RunConfig::model_dims() const {
  ModelDims d;
  d.vocab_size = vocab_size + Vocabulary::kNumSpecial;
  d.hidden = hidden_dim;
  d.layers = num_layers;
  d.heads = num_heads;
  d.max_seq = max_seq_len;
  d.ffn_mult = ffn_mult;
  return d;
}

AdamConfig RunConfig::adam_config() const { return {lr, adam_beta1, adam_beta2, adam_eps}; }

MaskingScheme RunConfig::masking() const {
  return masking_scheme == "bert" ? MaskingScheme::kBert : MaskingScheme::kMaskOnly;
}

void validate_config(const RunConfig& cfg) {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  check(cfg.vocab_size >= 10, "vocab_size must be >= 10");
  check(cfg.num_examples >= 1, "num_examples must be >= 1");
  check(cfg.passage_len_min >= 3, "passage_len_min must be >= 3");
  check(cfg.passage_len_min <= cfg.passage_len_max,
        "passage_len_min must be <= passage_len_max");
  check(cfg.passage_len_max <= cfg.vocab_size,
        "passage_len_max must be <= vocab_size");
  check(cfg.answer_len_max >= 1, "answer_len_max must be >= 1");
  check(cfg.passage_len_min >= cfg.answer_len_max + 2,
        "passage_len_min must be >= answer_len_max + 2");
  check(cfg.dur_min >= 2 && cfg.dur_min <= cfg.dur_max, "invalid duration range");
  check(cfg.proto_len >= 2, "proto_len must be >= 2");
  check(cfg.sigma >= 0.0 && cfg.sigma <= 10.0, "sigma outside [0, 10]");
  check(cfg.jitter >= 0 && cfg.jitter <= 100, "jitter outside [0, 100]");
  check(!cfg.wer_targets.empty(), "wer_targets must be non-empty");
  for (double w : cfg.wer_targets) {
    check(w >= 0.0 && w <= 0.8, "wer target outside [0, 0.8]");
  }
  for (double w : cfg.curve_wer_targets) {
    check(w >= 0.0 && w <= 0.8, "curve wer target outside [0, 0.8]");
  }
  check(cfg.curve_examples >= 0, "curve_examples must be >= 0");
  check(cfg.test_fraction >= 0.0 && cfg.test_fraction <= 1.0,
        "test_fraction outside [0, 1]");
  check(cfg.sub_frac >= 0.0 && cfg.del_frac >= 0.0 && cfg.ins_frac >= 0.0,
        "error-mass fractions must be >= 0");
  check(cfg.sub_frac + cfg.del_frac + cfg.ins_frac > 0.0,
        "error-mass fractions sum to zero");
  check(cfg.hidden_dim >= 1, "hidden_dim must be >= 1");
  check(cfg.num_layers >= 0, "num_layers must be >= 0");
  check(cfg.num_heads >= 1, "num_heads must be >= 1");
  check(cfg.hidden_dim % cfg.num_heads == 0, "hidden_dim must be divisible by num_heads");
  check(cfg.max_seq_len >= cfg.passage_len_max + 10,
        "max_seq_len must be >= passage_len_max + 10");
  check(cfg.ffn_mult >= 1, "ffn_mult must be >= 1");
  check(cfg.masking_rate >= 0.0 && cfg.masking_rate <= 1.0,
        "masking_rate outside [0, 1]");
  check(cfg.masking_scheme == "mask_only" || cfg.masking_scheme == "bert",
        "masking_scheme must be mask_only or bert");
  check(cfg.text_mlm_epochs >= 1 && cfg.joint_epochs >= 1 &&
            cfg.speechbert_mlm_epochs >= 1 && cfg.finetune_epochs >= 1 &&
            cfg.cascade_epochs >= 1,
        "epoch counts must be >= 1");
  check(cfg.joint_train_words >= 1, "joint_train_words must be >= 1");
  check(cfg.joint_batch_size >= 1 && cfg.batch_size >= 1, "batch sizes must be >= 1");
  check(cfg.lr > 0.0, "lr must be > 0");
  check(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0, "adam_beta1 outside [0, 1)");
  check(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0, "adam_beta2 outside [0, 1)");
  check(cfg.adam_eps > 0.0, "adam_eps must be > 0");
  check(cfg.lambda_l1 >= 0.0, "lambda_l1 must be >= 0");
  check(cfg.max_span_len >= 1, "max_span_len must be >= 1");
  check(cfg.wer_bucket_edges.size() >= 2, "wer_bucket_edges needs >= 2 edges");
  for (std::size_t i = 1; i < cfg.wer_bucket_edges.size(); ++i) {
    check(cfg.wer_bucket_edges[i] > cfg.wer_bucket_edges[i - 1],
          "wer_bucket_edges must be strictly increasing");
  }
  check(cfg.boundary_source == "asr" || cfg.boundary_source == "true",
        "boundary_source must be asr or true");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  const std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"seed", [&](const std::string& v) { cfg.seed = parse_u64("seed", v); }},
      {"vocab_size", [&](const std::string& v) { cfg.vocab_size = parse_int("vocab_size", v); }},
      {"num_examples", [&](const std::string& v) { cfg.num_examples = parse_int("num_examples", v); }},
      {"passage_len_min", [&](const std::string& v) { cfg.passage_len_min = parse_int("passage_len_min", v); }},
      {"passage_len_max", [&](const std::string& v) { cfg.passage_len_max = parse_int("passage_len_max", v); }},
      {"answer_len_max", [&](const std::string& v) { cfg.answer_len_max = parse_int("answer_len_max", v); }},
      {"dur_min", [&](const std::string& v) { cfg.dur_min = parse_int("dur_min", v); }},
      {"dur_max", [&](const std::string& v) { cfg.dur_max = parse_int("dur_max", v); }},
      {"proto_len", [&](const std::string& v) { cfg.proto_len = parse_int("proto_len", v); }},
      {"sigma", [&](const std::string& v) { cfg.sigma = parse_double("sigma", v); }},
      {"jitter", [&](const std::string& v) { cfg.jitter = parse_int("jitter", v); }},
      {"wer_targets", [&](const std::string& v) { cfg.wer_targets = parse_list("wer_targets", v); }},
      {"test_fraction", [&](const std::string& v) { cfg.test_fraction = parse_double("test_fraction", v); }},
      {"sub_frac", [&](const std::string& v) { cfg.sub_frac = parse_double("sub_frac", v); }},
      {"del_frac", [&](const std::string& v) { cfg.del_frac = parse_double("del_frac", v); }},
      {"ins_frac", [&](const std::string& v) { cfg.ins_frac = parse_double("ins_frac", v); }},
      {"curve_examples", [&](const std::string& v) { cfg.curve_examples = parse_int("curve_examples", v); }},
      {"curve_wer_targets", [&](const std::string& v) { cfg.curve_wer_targets = parse_list("curve_wer_targets", v); }},
      {"hidden_dim", [&](const std::string& v) { cfg.hidden_dim = parse_int("hidden_dim", v); }},
      {"num_layers", [&](const std::string& v) { cfg.num_layers = parse_int("num_layers", v); }},
      {"num_heads", [&](const std::string& v) { cfg.num_heads = parse_int("num_heads", v); }},
      {"max_seq_len", [&](const std::string& v) { cfg.max_seq_len = parse_int("max_seq_len", v); }},
      {"ffn_mult", [&](const std::string& v) { cfg.ffn_mult = parse_int("ffn_mult", v); }},
      {"masking_rate", [&](const std::string& v) { cfg.masking_rate = parse_double("masking_rate", v); }},
      {"masking_scheme", [&](const std::string& v) { cfg.masking_scheme = v; }},
      {"text_mlm_epochs", [&](const std::string& v) { cfg.text_mlm_epochs = parse_int("text_mlm_epochs", v); }},
      {"joint_epochs", [&](const std::string& v) { cfg.joint_epochs = parse_int("joint_epochs", v); }},
      {"joint_train_words", [&](const std::string& v) { cfg.joint_train_words = parse_int("joint_train_words", v); }},
      {"joint_batch_size", [&](const std::string& v) { cfg.joint_batch_size = parse_int("joint_batch_size", v); }},
      {"speechbert_mlm_epochs", [&](const std::string& v) { cfg.speechbert_mlm_epochs = parse_int("speechbert_mlm_epochs", v); }},
      {"finetune_epochs", [&](const std::string& v) { cfg.finetune_epochs = parse_int("finetune_epochs", v); }},
      {"cascade_epochs", [&](const std::string& v) { cfg.cascade_epochs = parse_int("cascade_epochs", v); }},
      {"batch_size", [&](const std::string& v) { cfg.batch_size = parse_int("batch_size", v); }},
      {"lr", [&](const std::string& v) { cfg.lr = parse_double("lr", v); }},
      {"adam_beta1", [&](const std::string& v) { cfg.adam_beta1 = parse_double("adam_beta1", v); }},
      {"adam_beta2", [&](const std::string& v) { cfg.adam_beta2 = parse_double("adam_beta2", v); }},
      {"adam_eps", [&](const std::string& v) { cfg.adam_eps = parse_double("adam_eps", v); }},
      {"lambda_l1", [&](const std::string& v) { cfg.lambda_l1 = parse_double("lambda_l1", v); }},
      {"max_span_len", [&](const std::string& v) { cfg.max_span_len = parse_int("max_span_len", v); }},
      {"wer_bucket_edges", [&](const std::string& v) { cfg.wer_bucket_edges = parse_list("wer_bucket_edges", v); }},
      {"skip_mlm", [&](const std::string& v) { cfg.skip_mlm = parse_bool("skip_mlm", v); }},
      {"boundary_source", [&](const std::string& v) { cfg.boundary_source = v; }},
  };

  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + trimmed + "'");
    }
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
    it->second(value);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace sqa
