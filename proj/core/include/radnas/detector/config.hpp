#pragma once

#include <array>
#include <string>
#include <vector>

#include "radnas/nn/fusion.hpp"

namespace radnas::detector {

// Which parts of the adapter branch are built (ablation toggles).
enum class Variant {
  kBaseline,   // no adapter: backbone + neck + head only
  kStemOnly,   // stem output added into the backbone after block 2
  kMode1Only,  // stem + four mode-1 exchangers
  kFull,       // stem + seven exchangers alternating modes
};

enum class Representation { kHeat, kGray };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(Representation r);
Representation representation_from_string(const std::string& s);

inline constexpr int kNumStages = 5;
inline constexpr int kNumNeckBlocks = 3;
inline constexpr int kMaxExchangers = 7;
inline constexpr int kStrides[3] = {8, 16, 32};

struct ModelConfig {
  int num_classes = 2;
  int input_h = 64;
  int input_w = 64;
  std::array<int, kNumStages> backbone_widths{16, 32, 64, 128, 256};
  std::array<int, 3> stem_widths{32, 32, 32};
  // Neck/head blocks in processing order: stride 32, 16, 8.
  std::array<int, kNumNeckBlocks> neck_widths{64, 64, 64};
  int bottlenecks = 1;
  Variant variant = Variant::kFull;
  Representation backbone_input = Representation::kHeat;
  Representation adapter_input = Representation::kGray;
  std::vector<int> exchanger_modes{1, 2, 1, 2, 1, 2, 1};

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  // Canonical text form; stable across runs.
  std::string canonical() const;
  std::string hash() const;
};

int input_channels(Representation r);

// Exchanger placement. `id` is 1-based over the seven full-layout sites so
// search-space block ids stay stable across variants.
struct ExchangerSite {
  int id = 1;
  int after_block = 2;  // backbone block whose output the exchanger sees
  int mode = 1;
};

// Full: ids 1..7 after blocks 2,3,3,4,4,5,5 with the configured modes.
// Mode-1-only: ids 1,3,5,7 after blocks 2,3,4,5, all mode 1. Otherwise empty.
std::vector<ExchangerSite> exchanger_layout(const ModelConfig& config);

// Realized channel counts and fusion choices of one subnet.
struct Architecture {
  std::array<int, kNumStages> backbone{};
  std::array<int, 3> stem{};
  std::array<int, kNumNeckBlocks> neck{};
  std::array<nn::FusionOption, kMaxExchangers> fusion{};

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

Architecture full_architecture(const ModelConfig& config,
                               nn::FusionOption fusion = nn::FusionOption::kGated);

// ModelConfig whose full widths equal the architecture's realized widths.
ModelConfig standalone_config(const ModelConfig& config, const Architecture& arch);

}  // namespace radnas::detector
