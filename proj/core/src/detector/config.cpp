#include "radnas/detector/config.hpp"

#include <sstream>
#include <stdexcept>

#include "radnas/util/hash.hpp"

namespace radnas::detector {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kStemOnly: return "stem_only";
    case Variant::kMode1Only: return "mode1_only";
    case Variant::kFull: return "full";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "baseline") return Variant::kBaseline;
  if (s == "stem_only") return Variant::kStemOnly;
  if (s == "mode1_only") return Variant::kMode1Only;
  if (s == "full") return Variant::kFull;
  throw std::invalid_argument("unknown variant '" + s +
                              "' (baseline|stem_only|mode1_only|full)");
}

std::string to_string(Representation r) {
  return r == Representation::kHeat ? "heat" : "gray";
}

Representation representation_from_string(const std::string& s) {
  if (s == "heat") return Representation::kHeat;
  if (s == "gray") return Representation::kGray;
  throw std::invalid_argument("unknown representation '" + s + "' (heat|gray)");
}

int input_channels(Representation r) { return r == Representation::kHeat ? 3 : 1; }

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("model config: " + what);
  };
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (input_h <= 0 || input_w <= 0 || input_h % 32 != 0 || input_w % 32 != 0) {
    fail("input size " + std::to_string(input_h) + "x" +
         std::to_string(input_w) + " must be a positive multiple of 32");
  }
  for (int w : backbone_widths) {
    if (w < 1) fail("backbone_widths entries must be >= 1");
  }
  for (int w : stem_widths) {
    if (w < 1) fail("stem_widths entries must be >= 1");
  }
  for (int w : neck_widths) {
    if (w < 1) fail("neck_widths entries must be >= 1");
  }
  if (bottlenecks < 0) fail("bottlenecks must be >= 0");
  if (variant == Variant::kFull) {
    if (exchanger_modes.size() != kMaxExchangers) {
      fail("exchanger_modes needs " + std::to_string(kMaxExchangers) +
           " entries for the full variant");
    }
    for (int m : exchanger_modes) {
      if (m != 1 && m != 2) fail("exchanger_modes entries must be 1 or 2");
    }
  }
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  auto list = [&](const auto& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  };
  os << "num_classes=" << num_classes << ";input=" << input_h << "x" << input_w
     << ";backbone=";
  list(backbone_widths);
  os << ";stem=";
  list(stem_widths);
  os << ";neck=";
  list(neck_widths);
  os << ";bottlenecks=" << bottlenecks << ";variant=" << to_string(variant)
     << ";backbone_input=" << to_string(backbone_input)
     << ";adapter_input=" << to_string(adapter_input) << ";modes=";
  list(exchanger_modes);
  return os.str();
}

std::string ModelConfig::hash() const { return util::sha256_hex(canonical()); }

std::vector<ExchangerSite> exchanger_layout(const ModelConfig& config) {
  std::vector<ExchangerSite> sites;
  if (config.variant == Variant::kFull) {
    constexpr int kAfter[kMaxExchangers] = {2, 3, 3, 4, 4, 5, 5};
    for (int i = 0; i < kMaxExchangers; ++i) {
      sites.push_back({i + 1, kAfter[i], config.exchanger_modes.at(i)});
    }
  } else if (config.variant == Variant::kMode1Only) {
    sites = {{1, 2, 1}, {3, 3, 1}, {5, 4, 1}, {7, 5, 1}};
  }
  return sites;
}

Architecture full_architecture(const ModelConfig& config, nn::FusionOption fusion) {
  Architecture arch;
  arch.backbone = config.backbone_widths;
  arch.stem = config.stem_widths;
  arch.neck = config.neck_widths;
  arch.fusion.fill(fusion);
  return arch;
}

ModelConfig standalone_config(const ModelConfig& config, const Architecture& arch) {
  ModelConfig out = config;
  out.backbone_widths = arch.backbone;
  out.stem_widths = arch.stem;
  out.neck_widths = arch.neck;
  return out;
}

}  // namespace radnas::detector
