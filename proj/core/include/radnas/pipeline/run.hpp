#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "radnas/pipeline/config.hpp"

namespace radnas::pipeline {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> kCommands{
      "synth", "preprocess", "train-supernet", "search", "retrain-top", "eval", "report"};
  return kCommands;
}

struct ArtifactRecord {
  std::string path;  // relative to the output root
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string config_copy;  // relative path of the resolved config copy
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;
  std::vector<ArtifactRecord> inputs;
  std::vector<ArtifactRecord> artifacts;
  std::map<std::string, std::string> versions;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

// A required upstream file is absent or differs from its recorded hash.
class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

// RADNAS_OUT if set, else the configured out_dir.
std::filesystem::path output_root(const PipelineConfig& config);

struct RunOptions {
  bool force = false;
  std::vector<std::string> overrides;
  std::ostream* out = nullptr;  // progress; defaults to std::cout
  std::ostream* err = nullptr;  // diagnostics; defaults to std::cerr
};

// Executes one pipeline stage. Returns 0 on success (including an up-to-date
// no-op), 2 for configuration errors, 3 for missing upstream artifacts and 1
// for other failures; diagnostics go to options.err.
int run(const std::string& command, const std::filesystem::path& config_path,
        const RunOptions& options = {});

// Stage layout under the output root.
namespace layout {
inline const char* kRuns = "runs";
inline const char* kData = "data";
inline const char* kSupernet = "supernet/supernet.rnck";
inline const char* kSupernetLog = "supernet/train_log.csv";
inline const char* kSearchLog = "search/search_log.csv";
inline const char* kSearchRanked = "search/ranked.csv";
inline const char* kSearchTop = "search/top";
inline const char* kRetrainSummary = "retrain/summary.csv";
inline const char* kBestGene = "retrain/best.gene";
inline const char* kBestModel = "retrain/best.rnck";
inline const char* kReport = "report/report.csv";
inline const char* kReportSummary = "report/summary.txt";
}  // namespace layout

}  // namespace radnas::pipeline
