#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radnas/detector/config.hpp"
#include "radnas/nas/search_space.hpp"

namespace radnas::nas {

// One parameterized unit of a realized subnet. Convolutions carry their
// geometry; scalar coefficients (gamma, lambda, alpha) have kernel 0.
struct LayerCost {
  std::string name;
  std::vector<int> in_channels;  // summed inputs of a multi-input conv
  int out_channels = 0;
  int kernel = 0;
  int out_h = 0;
  int out_w = 0;
  bool bias = true;
  bool norm = true;
  std::int64_t params = 0;
  std::int64_t flops = 0;  // 2 * C_in * C_out * k^2 * H_out * W_out
};

// Enumerates the subnet's layers from shapes alone, mirroring model assembly.
std::vector<LayerCost> layer_inventory(const detector::ModelConfig& config,
                                       const detector::Architecture& arch, int input_h,
                                       int input_w);

// Weights + biases + normalization scale/shift of the realized subnet.
std::int64_t count_params(const SearchSpace& space, const ArchitectureGene& gene,
                          const detector::ModelConfig& config);
std::int64_t count_params(const detector::ModelConfig& config,
                          const detector::Architecture& arch);

// Convolution multiply-accumulates counted twice (multiply + add).
std::int64_t estimate_flops(const SearchSpace& space, const ArchitectureGene& gene,
                            const detector::ModelConfig& config, int input_h, int input_w);
std::int64_t estimate_flops(const detector::ModelConfig& config,
                            const detector::Architecture& arch, int input_h, int input_w);

// Closed forms for single layers.
std::int64_t conv_params(int in_channels, int out_channels, int kernel, bool bias,
                         bool norm);
std::int64_t conv_flops(int in_channels, int out_channels, int kernel, int out_h,
                        int out_w);

}  // namespace radnas::nas
