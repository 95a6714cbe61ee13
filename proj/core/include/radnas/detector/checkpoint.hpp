#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "radnas/detector/model.hpp"

namespace radnas::detector {

struct CheckpointMeta {
  std::string config_hash;
  std::optional<std::string> gene;  // gene file text for fixed models
  int epoch = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

// Binary "RNCK" file holding every parameter and buffer of the model as
// named float64 tensors, plus a JSON sidecar `<path>.meta.json`.
void save_checkpoint(Model& model, const std::filesystem::path& path,
                     const CheckpointMeta& meta);
// Loads into a model of identical structure; throws on a missing, extra or
// mis-shaped tensor.
CheckpointMeta load_checkpoint(Model& model, const std::filesystem::path& path);
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);
std::filesystem::path checkpoint_meta_path(const std::filesystem::path& path);

}  // namespace radnas::detector
