#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "radnas/io/dataset.hpp"

namespace radnas::io {

// Desk-scale stand-in for recorded RD datasets. Each class is a family of
// 2-D Gaussian blobs with a characteristic range/Doppler spread; boxes are
// drawn at the `contour_fraction` iso-intensity level of each blob.
struct SynthConfig {
  int height = 64;  // range bins
  int width = 64;   // Doppler bins
  int num_train = 500;
  int num_val = 100;
  int num_test = 100;
  int num_classes = 2;
  int min_objects = 1;
  int max_objects = 3;
  double snr_min_db = 8.0;
  double snr_max_db = 20.0;
  double contour_fraction = 0.135335283236612691;  // exp(-2): +-2 sigma box

  // Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

inline constexpr int kMaxSynthClasses = 4;

struct SynthResult {
  std::map<std::string, std::filesystem::path> manifests;  // split -> path
};

// One synthetic scene; deterministic in (config, seed, split, index).
struct SynthScene {
  RDMap rd;
  std::vector<Annotation> labels;
};
SynthScene synth_scene(const SynthConfig& config, std::uint64_t seed,
                       const std::string& split, int index);

// Writes <out_dir>/<split>/manifest.jsonl and one .rdm per sample.
SynthResult synth_generate(const SynthConfig& config, std::uint64_t seed,
                           const std::filesystem::path& out_dir);

}  // namespace radnas::io
