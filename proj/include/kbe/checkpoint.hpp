#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "kbe/model_params.hpp"

namespace kbe {

/// Checkpoint layout (format version 1):
///
///   line 1   "KBE-CHECKPOINT 1"
///   line 2   one-line JSON header: model kind, activation, every hyperparameter,
///            entity/relation counts, vocabulary hash, seed, initialization scheme,
///            relation block names and sizes, payload length and FNV-1a checksum
///   payload  little-endian IEEE-754 doubles, in order:
///            entity table (row-major), every relation's blocks (relation id order,
///            block layout order, matrices column-major), then the AdaGrad
///            accumulators in the same two-part order.
///
/// Saving is bit-exact; loading either reproduces the saved parameters or throws
/// CheckpointError naming the offending field.
inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint64_t vocabulary_hash = 0;
};

void save_checkpoint(const ModelParams& params, std::uint64_t vocabulary_hash, const std::string& path);

/// When `expected_vocabulary_hash` is set, a different stored hash is an error.
ModelParams load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_vocabulary_hash = {},
                            CheckpointInfo* info = nullptr);

}  // namespace kbe
