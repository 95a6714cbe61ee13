#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "radnas/io/rdmap.hpp"

namespace radnas::io {

// Ground-truth object; box center/size normalized to [0,1] with cx along
// Doppler (width) and cy along range (height).
struct Annotation {
  int class_id = 0;
  double cx = 0, cy = 0, w = 0, h = 0;

  // Throws std::invalid_argument if the box leaves [0,1]^2, has a
  // non-positive side, or the class is outside [0, num_classes).
  void validate(int num_classes) const;
};

struct ManifestRecord {
  std::string sample_id;
  std::string rd;   // path relative to the manifest directory
  std::string adc;  // optional raw cube, converted by `preprocess`
  std::vector<Annotation> labels;
};

struct DatasetManifest {
  std::string split;                 // train | val | test
  std::filesystem::path base_dir;    // directory holding manifest.jsonl
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::string& relative) const {
    return base_dir / relative;
  }
};

// Raised for a single bad record; carries the offending sample id.
class RecordError : public std::runtime_error {
 public:
  RecordError(std::string sample_id, const std::string& what)
      : std::runtime_error(sample_id + ": " + what),
        sample_id_(std::move(sample_id)) {}
  const std::string& sample_id() const { return sample_id_; }

 private:
  std::string sample_id_;
};

DatasetManifest read_manifest(const std::filesystem::path& path,
                              int num_classes);
void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest);
// Split name inferred from the parent directory when not given explicitly.
std::string infer_split(const std::filesystem::path& manifest_path);

struct Sample {
  std::string sample_id;
  RepresentationPair pair;
  std::vector<Annotation> labels;
};

struct LoadOptions {
  int num_classes = 2;
  bool shuffle = false;
  std::uint64_t seed = 0;
};

// Yields decoded samples in manifest order (or a seeded permutation).
class DatasetReader {
 public:
  DatasetReader(const std::filesystem::path& manifest_path, LoadOptions options);

  std::size_t size() const { return order_.size(); }
  // Returns the next sample, std::nullopt at the end. A record whose RD file
  // is missing or corrupt throws RecordError; the reader moves past it.
  std::optional<Sample> next();
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  DatasetManifest manifest_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path,
                                 const LoadOptions& options = {});

}  // namespace radnas::io
