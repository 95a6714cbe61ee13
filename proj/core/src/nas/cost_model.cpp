#include "radnas/nas/cost_model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace radnas::nas {

using detector::Architecture;
using detector::ModelConfig;
using detector::Variant;

std::int64_t conv_params(int in_channels, int out_channels, int kernel, bool bias,
                         bool norm) {
  std::int64_t n = std::int64_t{in_channels} * out_channels * kernel * kernel;
  if (bias) n += out_channels;
  if (norm) n += 2 * std::int64_t{out_channels};
  return n;
}

std::int64_t conv_flops(int in_channels, int out_channels, int kernel, int out_h,
                        int out_w) {
  return 2 * std::int64_t{in_channels} * out_channels * kernel * kernel * out_h * out_w;
}

namespace {

class Inventory {
 public:
  void conv(std::string name, std::vector<int> in, int out, int k, int h, int w,
            bool norm = true) {
    LayerCost l;
    l.name = std::move(name);
    l.in_channels = std::move(in);
    l.out_channels = out;
    l.kernel = k;
    l.out_h = h;
    l.out_w = w;
    l.norm = norm;
    for (std::size_t i = 0; i < l.in_channels.size(); ++i) {
      l.params += conv_params(l.in_channels[i], out, k, i == 0, false);
      l.flops += conv_flops(l.in_channels[i], out, k, h, w);
    }
    if (norm) l.params += 2 * std::int64_t{out};
    layers.push_back(std::move(l));
  }
  void scalar(std::string name) {
    LayerCost l;
    l.name = std::move(name);
    l.bias = false;
    l.norm = false;
    l.params = 1;
    layers.push_back(std::move(l));
  }
  std::vector<LayerCost> layers;
};

int attention_mid(int c) { return std::max(8, c / 8); }

}  // namespace

std::vector<LayerCost> layer_inventory(const ModelConfig& config, const Architecture& arch,
                                       int input_h, int input_w) {
  if (input_h % 32 != 0 || input_w % 32 != 0 || input_h <= 0 || input_w <= 0) {
    throw std::invalid_argument("layer_inventory: input dims must be positive multiples of 32");
  }
  Inventory inv;
  std::array<int, 6> sh{}, sw{};  // spatial size after block b (index 0 = input)
  sh[0] = input_h;
  sw[0] = input_w;
  for (int b = 1; b <= 5; ++b) {
    sh[b] = sh[b - 1] / 2;
    sw[b] = sw[b - 1] / 2;
  }

  int in = detector::input_channels(config.backbone_input);
  for (int b = 0; b < detector::kNumStages; ++b) {
    const std::string name = "backbone." + std::to_string(b + 1);
    const int w = arch.backbone[b];
    inv.conv(name + ".down", {in}, w, 3, sh[b + 1], sw[b + 1]);
    for (int k = 0; k < config.bottlenecks; ++k) {
      inv.conv(name + ".conv1", {w}, w, 3, sh[b + 1], sw[b + 1]);
      inv.conv(name + ".conv2", {w}, w, 3, sh[b + 1], sw[b + 1]);
    }
    in = w;
  }

  const int gh = input_h / 4;
  const int gw = input_w / 4;
  if (config.variant != Variant::kBaseline) {
    const int a = detector::input_channels(config.adapter_input);
    inv.conv("stem.1", {a}, arch.stem[0], 3, input_h / 2, input_w / 2);
    inv.conv("stem.2", {arch.stem[0]}, arch.stem[1], 3, gh, gw);
    inv.conv("stem.3", {arch.stem[1]}, arch.stem[2], 3, gh, gw);
  }
  if (config.variant == Variant::kStemOnly) {
    inv.conv("stem_merge", {arch.stem[2]}, arch.backbone[1], 1, gh, gw);
  }
  for (const auto& site : detector::exchanger_layout(config)) {
    const std::string name = "exchanger." + std::to_string(site.id);
    const int heat_c = arch.backbone[site.after_block - 1];
    const int hh = sh[site.after_block];
    const int hw = sw[site.after_block];
    const bool heat_primary = site.mode == 1;
    const int p = heat_primary ? heat_c : arch.stem[2];
    const int a = heat_primary ? arch.stem[2] : heat_c;
    const int ph = heat_primary ? hh : gh;
    const int pw = heat_primary ? hw : gw;
    inv.conv(name + ".aux_proj", {a}, p, 1, heat_primary ? gh : hh, heat_primary ? gw : hw);
    switch (arch.fusion[site.id - 1]) {
      case nn::FusionOption::kGated: inv.scalar(name + ".gamma"); break;
      case nn::FusionOption::kWeighted: inv.scalar(name + ".lambda"); break;
      case nn::FusionOption::kSum: break;
    }
    inv.scalar(name + ".alpha");
    const int mid = attention_mid(p);
    inv.conv(name + ".reduce", {p}, mid, 1, ph + pw, 1);
    inv.conv(name + ".gate_h", {mid}, p, 1, ph, 1, false);
    inv.conv(name + ".gate_w", {mid}, p, 1, pw, 1, false);
  }

  const auto& n = arch.neck;
  inv.conv("neck.1", {arch.backbone[4]}, n[0], 1, sh[5], sw[5]);
  inv.conv("neck.2", {arch.backbone[3], n[0]}, n[1], 3, sh[4], sw[4]);
  inv.conv("neck.3", {arch.backbone[2], n[1]}, n[2], 3, sh[3], sw[3]);
  for (int i = 0; i < detector::kNumNeckBlocks; ++i) {
    const std::string name = "head." + std::to_string(i + 1);
    const int h = sh[5 - i];
    const int w = sw[5 - i];
    inv.conv(name + ".cls_hidden", {n[i]}, n[i], 3, h, w);
    inv.conv(name + ".box_hidden", {n[i]}, n[i], 3, h, w);
    inv.conv(name + ".cls_out", {n[i]}, config.num_classes, 1, h, w, false);
    inv.conv(name + ".box_out", {n[i]}, 4, 1, h, w, false);
  }
  return inv.layers;
}

std::int64_t count_params(const ModelConfig& config, const Architecture& arch) {
  std::int64_t total = 0;
  for (const auto& l : layer_inventory(config, arch, config.input_h, config.input_w)) {
    total += l.params;
  }
  return total;
}

std::int64_t count_params(const SearchSpace& space, const ArchitectureGene& gene,
                          const ModelConfig& config) {
  return count_params(config, to_architecture(space, gene, config));
}

std::int64_t estimate_flops(const ModelConfig& config, const Architecture& arch,
                            int input_h, int input_w) {
  std::int64_t total = 0;
  for (const auto& l : layer_inventory(config, arch, input_h, input_w)) total += l.flops;
  return total;
}

std::int64_t estimate_flops(const SearchSpace& space, const ArchitectureGene& gene,
                            const ModelConfig& config, int input_h, int input_w) {
  return estimate_flops(config, to_architecture(space, gene, config), input_h, input_w);
}

}  // namespace radnas::nas
