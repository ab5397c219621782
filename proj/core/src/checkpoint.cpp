#include "sqa/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sqa/error.hpp"
#include "sqa/rng.hpp"

namespace sqa {

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'A', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

void put_string(std::string& buf, const std::string& s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s);
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path)
      : data_(data), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s = data_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  void expect_magic() {
    need(8);
    if (std::memcmp(data_.data(), kMagic, 8) != 0) {
      throw FormatError("checkpoint " + path_ + ": bad magic");
    }
    pos_ += 8;
  }

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return data_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw FormatError("checkpoint " + path_ + ": truncated payload");
    }
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::string buf;
  buf.append(kMagic, 8);
  put_u32(buf, header.version);
  put_string(buf, header.stage);
  put_u64(buf, header.config_hash);
  put_u64(buf, header.seed);
  put_u32(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_string(buf, name);
    put_u32(buf, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u64(buf, static_cast<std::uint64_t>(d));
    for (double v : t.data()) put_f32(buf, static_cast<float>(v));
  }
  put_u64(buf, stable_hash64(buf));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint " + path + ": cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("checkpoint " + path + ": write failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint " + path + ": cannot open");
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (data.size() < 8 + 4 + 8) throw FormatError("checkpoint " + path + ": too short");

  const std::string body = data.substr(0, data.size() - 8);
  {
    // Verify the trailing checksum over everything before it.
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
      stored |= static_cast<std::uint64_t>(
                    static_cast<unsigned char>(data[data.size() - 8 + i]))
                << (8 * i);
    if (stable_hash64(body) != stored) {
      throw FormatError("checkpoint " + path + ": checksum mismatch (corrupt file)");
    }
  }

  Reader r(body, path);
  r.expect_magic();
  LoadedCheckpoint out;
  out.header.version = r.u32();
  if (out.header.version != kCheckpointVersion) {
    throw FormatError("checkpoint " + path + ": format version " +
                      std::to_string(out.header.version) + ", expected " +
                      std::to_string(kCheckpointVersion));
  }
  out.header.stage = r.str();
  out.header.config_hash = r.u64();
  out.header.seed = r.u64();
  const std::uint32_t count = r.u32();
  out.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint " + path + ": implausible rank");
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::int64_t>(r.u64());
    }
    const std::int64_t n = shape_numel(shape);
    std::vector<double> values(n);
    for (std::int64_t k = 0; k < n; ++k) values[k] = r.f32();
    out.tensors.emplace_back(std::move(name),
                             Tensor::from_data(std::move(shape), std::move(values)));
  }
  if (r.pos() != body.size()) {
    throw FormatError("checkpoint " + path + ": trailing bytes after payload");
  }
  return out;
}

void assign_named_parameters(
    const std::vector<std::pair<std::string, Tensor>>& model_params,
    const LoadedCheckpoint& ckpt) {
  if (model_params.size() != ckpt.tensors.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(model_params.size()) +
                      " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < model_params.size(); ++i) {
    const auto& [want_name, param] = model_params[i];
    const auto& [got_name, value] = ckpt.tensors[i];
    if (want_name != got_name) {
      throw FormatError("checkpoint: tensor '" + got_name + "' where '" + want_name +
                        "' was expected");
    }
    if (!same_shape(param.shape(), value.shape())) {
      throw FormatError("checkpoint: tensor '" + got_name + "' has shape " +
                        shape_str(value.shape()) + ", expected " +
                        shape_str(param.shape()));
    }
    Tensor p = param;
    p.raw_data() = value.data();
  }
}

void round_parameters_to_f32(
    const std::vector<std::pair<std::string, Tensor>>& params) {
  for (const auto& [name, t] : params) {
    Tensor p = t;
    for (auto& v : p.raw_data()) v = static_cast<float>(v);
  }
}

}  // namespace sqa
