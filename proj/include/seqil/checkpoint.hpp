#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "seqil/model.hpp"
#include "seqil/optimizer.hpp"

namespace seqil {

// Binary checkpoint: fixed magic and version, architecture header,
// named parameter arrays (bit-exact 64-bit floats), and optionally the
// optimizer state. Writes go to a temporary file that is renamed into
// place, so an interrupted save never leaves a torn checkpoint behind.
struct CheckpointMeta {
  uint64_t step = 0;
  uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const SequenceModel& model, CheckpointMeta meta,
                     const Adam* optimizer = nullptr);

struct LoadedCheckpoint {
  ModelConfig config;
  CheckpointMeta meta;
  bool has_optimizer = false;
};

// Reads the header without touching any model.
LoadedCheckpoint peek_checkpoint(const std::string& path);

// Loads parameters into an existing model whose architecture must match
// the header exactly. Returns the stored metadata. If `optimizer` is
// given, the checkpoint must contain optimizer state and it is restored
// too. The model is modified only after the whole file has parsed.
CheckpointMeta load_checkpoint(const std::string& path, SequenceModel& model,
                               Adam* optimizer = nullptr);

}  // namespace seqil
