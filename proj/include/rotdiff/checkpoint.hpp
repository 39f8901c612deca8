#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rotdiff/nn.hpp"

namespace rotdiff {

/// Checkpoint payload. Parameters (values plus Adam moments) come from or go
/// into a ParamStore; everything needed to rebuild the models and resume the
/// loop rides along: resolved hyperparameters, the skeleton hash the run was
/// trained against, the 1-based count of optimizer steps taken, and the loop
/// RNG state.
struct CheckpointData {
  uint64_t skeleton_hash = 0;
  int64_t step = 0;
  std::string rng_state;
  std::map<std::string, std::string> hyper;
};

/// Binary little-endian container: fixed magic + format version, the fields
/// above, then every ParamStore entry (sorted by name) as value/m/v blocks.
/// Writing the same state twice produces byte-identical files.
void save_checkpoint(const std::string& path, const ParamStore& ps, const CheckpointData& meta);

struct LoadedCheckpoint {
  CheckpointData meta;
  ParamStore ps;
};

/// Throws std::runtime_error on bad magic, unsupported version, or a
/// truncated/garbled file.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace rotdiff
