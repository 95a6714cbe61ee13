#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "radnas/detector/config.hpp"
#include "radnas/io/dataset.hpp"
#include "radnas/nas/search_space.hpp"
#include "radnas/nn/fusion.hpp"
#include "radnas/nn/stem.hpp"

namespace radnas::detector {

struct Bottleneck {
  nn::USConvLayer conv1;
  nn::USConvLayer conv2;
};

// Stride-2 3x3 downsample followed by residual bottlenecks at one width.
struct BackboneStage {
  nn::USConvLayer down;
  std::vector<Bottleneck> blocks;
};

// Decoupled head for one scale: class and box towers, then 1x1 outputs.
struct HeadBranch {
  nn::USConvLayer cls_hidden;
  nn::USConvLayer box_hidden;
  nn::USConvLayer cls_out;  // -> num_classes logits
  nn::USConvLayer box_out;  // -> 4 offsets (softplus applied in forward)
};

// Per-scale predictions ordered by stride 8, 16, 32. cls[s] is
// {N, num_classes, Gh, Gw} logits, box[s] is {N, 4, Gh, Gw} non-negative
// (l, t, r, b) distances in cell units from the cell center.
struct DetectionOutput {
  std::array<Var, 3> cls;
  std::array<Var, 3> box;
};

struct Model {
  ModelConfig config;
  std::array<BackboneStage, kNumStages> backbone;
  std::optional<nn::StemParams> stem;
  std::optional<nn::USConvLayer> stem_merge;  // stem_only: stem -> block 2
  std::vector<ExchangerSite> sites;
  std::vector<nn::ExchangerParams> exchangers;  // aligned with sites
  // neck[0] merges stride 32, neck[1] stride 16, neck[2] stride 8.
  std::array<nn::USConvLayer, kNumNeckBlocks> neck;
  std::array<HeadBranch, kNumNeckBlocks> heads;

  // Forward through the subnet `arch`. backbone_in / adapter_in are the
  // representations routed to each branch. detach_adapter skips the stem and
  // every exchanger.
  DetectionOutput forward(const Var& backbone_in, const Var& adapter_in,
                          const Architecture& arch, const nn::ForwardContext& ctx,
                          bool detach_adapter = false);

  void visit(const nn::TensorVisitor& v);
  std::vector<Parameter*> parameters();
  std::size_t parameter_count();
  // Parameters belonging to the stem, stem merge and exchangers.
  std::size_t adapter_parameter_count();
  // Widths and fusion choices the model was built with.
  Architecture full_arch() const { return built; }

  Architecture built;
};

// Supernet at full widths; every exchanger carries all three fusion options.
Model build_supernet(const ModelConfig& config, std::uint64_t seed);
// Standalone model whose full widths are the architecture's widths and whose
// exchangers carry only the selected fusion option.
Model build_model(const ModelConfig& config, const Architecture& arch,
                  std::uint64_t seed);
// Validates the gene against the space first (naming offending blocks).
Model build_model(const ModelConfig& config, const nas::SearchSpace& space,
                  const nas::ArchitectureGene& gene, std::uint64_t seed);

// Copies the inherited prefix slices (parameters and normalization buffers)
// of `arch` out of the supernet into a standalone model.
Model extract_subnet(Model& supernet, const Architecture& arch);

// Input batch with both representations stacked along N.
struct Batch {
  Tensor heat;  // {N,3,H,W}
  Tensor gray;  // {N,1,H,W}
  std::vector<std::vector<io::Annotation>> labels;
  int size() const { return heat.shape().n; }
};

// flip[i] mirrors sample i along Doppler (W) together with its labels. An
// empty flip vector means no flipping.
Batch make_batch(const std::vector<const io::Sample*>& samples,
                 const std::vector<bool>& flip = {});

// Routes the batch per the model's configuration; rejects spatial sizes that
// are not multiples of 32.
DetectionOutput forward_dual_branch(Model& model, const Batch& batch,
                                    const Architecture& arch,
                                    const nn::ForwardContext& ctx,
                                    bool detach_adapter = false);

}  // namespace radnas::detector
