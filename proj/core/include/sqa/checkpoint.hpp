#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqa/tensor.hpp"

namespace sqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::string stage;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Binary checkpoint: header plus named tensors with float32 little-endian
/// payloads, closed by a checksum over everything written.
void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);

struct LoadedCheckpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

/// Verifies magic, version, checksum, and payload shapes; the float32 values
/// are widened back to doubles.
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Copies checkpoint values into the model's named parameters, rounding
/// through float32. Missing or extra names and shape mismatches raise
/// FormatError.
void assign_named_parameters(
    const std::vector<std::pair<std::string, Tensor>>& model_params,
    const LoadedCheckpoint& ckpt);

/// Rounds every value of every tensor through float32 in place; after a
/// save/load cycle a model behaves exactly like its rounded original.
void round_parameters_to_f32(const std::vector<std::pair<std::string, Tensor>>& params);

}  // namespace sqa
