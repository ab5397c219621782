#pragma once

#include <cstdint>
#include <string>

#include "sqa/corpus.hpp"

namespace sqa {

/// Persists the dataset as a JSON-Lines metadata file plus a raw binary
/// feature file of little-endian float32 frames (frame-major, passage after
/// passage), with per-word offsets carried by the boundary records. The
/// round trip is bit-exact.
void save_dataset(const QaDataset& dataset, const std::string& jsonl_path,
                  const std::string& features_path, std::uint64_t config_hash);

/// Loads a persisted dataset; the vocabulary is rebuilt deterministically
/// from the recorded build parameters. `expected_config_hash` of 0 skips the
/// staleness check.
QaDataset load_dataset(const std::string& jsonl_path, const std::string& features_path,
                       std::uint64_t expected_config_hash = 0);

}  // namespace sqa
