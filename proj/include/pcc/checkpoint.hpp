#pragma once

#include <optional>
#include <string>

#include "pcc/compress.hpp"
#include "pcc/model.hpp"

namespace pcc {

// Checkpoint container: magic "PCC1", length-prefixed UTF-8 JSON config, then
// named parameter blobs (name, dims, little-endian f32 data) in sorted-name
// order. Adapters must be merged before saving.
struct LoadedCheckpoint {
  Model model;
  std::optional<Projection> projection;
};

void save_checkpoint(const std::string& path, Model& model, const Projection* projection);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace pcc
