#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "radnas/detector/decode.hpp"
#include "radnas/detector/trainer.hpp"
#include "radnas/io/synth.hpp"
#include "radnas/nas/evolution.hpp"
#include "radnas/nas/fitness.hpp"

namespace radnas::pipeline {

struct DatasetSection {
  std::string source = "synth";  // synth | manifest
  std::string root;               // manifest source: dir with <split>/manifest.jsonl
  io::SynthConfig synth;
};

struct SearchSection {
  std::string space = "reduced";  // default | reduced
  nas::SearchConfig config;
  int recalib_batches = nas::kDefaultRecalibBatches;
  int recalib_batch_size = 16;
};

struct RetrainSection {
  int top = 5;
  detector::TrainHyper hyper;
};

struct EvalSection {
  std::string split = "test";
  int batch_size = 32;
  detector::DecodeOptions decode;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs";
  DatasetSection dataset;
  detector::ModelConfig model;
  detector::TrainHyper supernet;
  SearchSection search;
  RetrainSection retrain;
  EvalSection eval;

  // INI text with every field; parsing it yields the same config.
  std::string render() const;
  // Hash of the rendered config without out_dir.
  std::string hash() const;
};

// Raised with every field-level violation found.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// `overrides` are dotted-path key=value pairs applied after the file, e.g.
// "search.top_k=10" or "seed=3".
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});
PipelineConfig parse_config(const std::string& text,
                            const std::vector<std::string>& overrides = {});
// Empty when the file parses and validates.
std::vector<std::string> validate_config(const std::filesystem::path& path,
                                         const std::vector<std::string>& overrides = {});

}  // namespace radnas::pipeline
