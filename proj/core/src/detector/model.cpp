#include "radnas/detector/model.hpp"

#include <map>
#include <random>
#include <stdexcept>

namespace radnas::detector {

using nn::FusionOption;
using nn::USConvLayer;

namespace {

constexpr double kClsPriorBias = -4.6;  // sigmoid ~ 0.01

const std::vector<FusionOption> kAllFusion{FusionOption::kGated, FusionOption::kSum,
                                           FusionOption::kWeighted};

// Shared construction; `fusion` gives the option set of each exchanger id.
Model build(const ModelConfig& config,
            const std::array<std::vector<FusionOption>, kMaxExchangers>& fusion,
            std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.config = config;
  m.built = full_architecture(config);
  for (int i = 0; i < kMaxExchangers; ++i) m.built.fusion[i] = fusion[i].front();

  int in = input_channels(config.backbone_input);
  for (int b = 0; b < kNumStages; ++b) {
    const std::string name = "backbone." + std::to_string(b + 1);
    const int w = config.backbone_widths[b];
    BackboneStage& st = m.backbone[b];
    st.down = USConvLayer::create(name + ".down", {in}, w, 3, 2, true, rng);
    for (int k = 0; k < config.bottlenecks; ++k) {
      const std::string bn = name + ".bottleneck" + std::to_string(k + 1);
      Bottleneck blk;
      blk.conv1 = USConvLayer::create(bn + ".conv1", {w}, w, 3, 1, true, rng);
      blk.conv2 = USConvLayer::create(bn + ".conv2", {w}, w, 3, 1, true, rng);
      st.blocks.push_back(std::move(blk));
    }
    in = w;
  }

  if (config.variant != Variant::kBaseline) {
    m.stem = nn::StemParams::create("stem", input_channels(config.adapter_input),
                                    config.stem_widths, rng);
  }
  const int gray_w = config.stem_widths[2];
  if (config.variant == Variant::kStemOnly) {
    m.stem_merge = USConvLayer::create("stem_merge", {gray_w},
                                       config.backbone_widths[1], 1, 1, true, rng);
  }
  m.sites = exchanger_layout(config);
  for (const auto& site : m.sites) {
    const int heat_w = config.backbone_widths[site.after_block - 1];
    const bool heat_primary = site.mode == 1;
    m.exchangers.push_back(nn::ExchangerParams::create(
        "exchanger." + std::to_string(site.id), site.mode,
        heat_primary ? heat_w : gray_w, heat_primary ? gray_w : heat_w,
        fusion[site.id - 1], rng));
  }

  const auto& bw = config.backbone_widths;
  const auto& nw = config.neck_widths;
  m.neck[0] = USConvLayer::create("neck.1", {bw[4]}, nw[0], 1, 1, true, rng);
  m.neck[1] = USConvLayer::create("neck.2", {bw[3], nw[0]}, nw[1], 3, 1, true, rng);
  m.neck[2] = USConvLayer::create("neck.3", {bw[2], nw[1]}, nw[2], 3, 1, true, rng);
  for (int i = 0; i < kNumNeckBlocks; ++i) {
    const std::string name = "head." + std::to_string(i + 1);
    HeadBranch& h = m.heads[i];
    h.cls_hidden = USConvLayer::create(name + ".cls_hidden", {nw[i]}, nw[i], 3, 1, true, rng);
    h.box_hidden = USConvLayer::create(name + ".box_hidden", {nw[i]}, nw[i], 3, 1, true, rng);
    h.cls_out = USConvLayer::create(name + ".cls_out", {nw[i]}, config.num_classes, 1, 1,
                                    false, rng);
    h.box_out = USConvLayer::create(name + ".box_out", {nw[i]}, 4, 1, 1, false, rng);
    h.cls_out.bias.value.fill(kClsPriorBias);
  }
  return m;
}

Var stage_forward(BackboneStage& st, const Var& x, int width,
                  const nn::ForwardContext& ctx) {
  Var y = nn::usconv_forward(st.down, x, width, ctx);
  for (auto& blk : st.blocks) {
    Var h = nn::usconv_forward(blk.conv1, y, width, ctx);
    h = nn::usconv_forward(blk.conv2, h, width, ctx);
    y = ops::add(y, h);
  }
  return y;
}

void visit_layer(USConvLayer& l, const nn::TensorVisitor& v) { l.visit(v); }

}  // namespace

DetectionOutput Model::forward(const Var& backbone_in, const Var& adapter_in,
                               const Architecture& arch,
                               const nn::ForwardContext& ctx, bool detach_adapter) {
  const Shape s = backbone_in->shape();
  if (s.h % 32 != 0 || s.w % 32 != 0) {
    throw std::invalid_argument("forward: input " + std::to_string(s.h) + "x" +
                                std::to_string(s.w) + " not divisible by 32");
  }
  const bool adapter = !detach_adapter && stem.has_value();
  Var gray;
  if (adapter) {
    if (!adapter_in || adapter_in->shape().h != s.h || adapter_in->shape().w != s.w) {
      throw std::invalid_argument("forward: adapter input missing or misaligned");
    }
    gray = nn::stem_forward(adapter_in, *stem, arch.stem, ctx);
  }

  Var x = backbone_in;
  std::array<Var, kNumStages> outs;
  for (int b = 0; b < kNumStages; ++b) {
    x = stage_forward(backbone[b], x, arch.backbone[b], ctx);
    if (adapter && b == 1 && stem_merge) {
      x = ops::add(x, nn::usconv_forward(*stem_merge, gray, arch.backbone[1], ctx));
    }
    if (adapter) {
      for (std::size_t i = 0; i < sites.size(); ++i) {
        if (sites[i].after_block != b + 1) continue;
        auto [h, g] = nn::exchanger_forward(x, gray, exchangers[i],
                                            arch.fusion[sites[i].id - 1], ctx);
        x = h;
        gray = g;
      }
    }
    outs[b] = x;
  }

  // Top-down merge: neck[0] at stride 32, neck[1] at 16, neck[2] at 8.
  std::array<Var, kNumNeckBlocks> n;
  n[0] = nn::usconv_forward(neck[0], outs[4], arch.neck[0], ctx);
  for (int i = 1; i < kNumNeckBlocks; ++i) {
    const Var& lateral = outs[4 - i];
    Var up = ops::resize_bilinear(n[i - 1], lateral->shape().h, lateral->shape().w);
    const Var inputs[2] = {lateral, up};
    n[i] = nn::usconv_forward(neck[i], std::span<const Var>(inputs, 2), arch.neck[i], ctx);
  }

  DetectionOutput out;
  for (int i = 0; i < kNumNeckBlocks; ++i) {
    HeadBranch& h = heads[i];
    const int w = arch.neck[i];
    Var c = nn::usconv_forward(h.cls_hidden, n[i], w, ctx);
    Var bx = nn::usconv_forward(h.box_hidden, n[i], w, ctx);
    const int scale = kNumNeckBlocks - 1 - i;  // output ordered by stride 8,16,32
    out.cls[scale] = nn::usconv_forward(h.cls_out, c, config.num_classes, ctx);
    out.box[scale] = ops::softplus(nn::usconv_forward(h.box_out, bx, 4, ctx));
  }
  return out;
}

void Model::visit(const nn::TensorVisitor& v) {
  for (auto& st : backbone) {
    visit_layer(st.down, v);
    for (auto& blk : st.blocks) {
      visit_layer(blk.conv1, v);
      visit_layer(blk.conv2, v);
    }
  }
  if (stem) stem->visit(v);
  if (stem_merge) stem_merge->visit(v);
  for (auto& ex : exchangers) ex.visit(v);
  for (auto& l : neck) visit_layer(l, v);
  for (auto& h : heads) {
    visit_layer(h.cls_hidden, v);
    visit_layer(h.box_hidden, v);
    visit_layer(h.cls_out, v);
    visit_layer(h.box_out, v);
  }
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  visit({[&](Parameter& p) { out.push_back(&p); }, nullptr});
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->numel();
  return n;
}

std::size_t Model::adapter_parameter_count() {
  std::size_t n = 0;
  nn::TensorVisitor v{[&](Parameter& p) { n += p.numel(); }, nullptr};
  if (stem) stem->visit(v);
  if (stem_merge) stem_merge->visit(v);
  for (auto& ex : exchangers) ex.visit(v);
  return n;
}

Model build_supernet(const ModelConfig& config, std::uint64_t seed) {
  std::array<std::vector<FusionOption>, kMaxExchangers> fusion;
  fusion.fill(kAllFusion);
  return build(config, fusion, seed);
}

Model build_model(const ModelConfig& config, const Architecture& arch,
                  std::uint64_t seed) {
  std::array<std::vector<FusionOption>, kMaxExchangers> fusion;
  for (int i = 0; i < kMaxExchangers; ++i) fusion[i] = {arch.fusion[i]};
  return build(standalone_config(config, arch), fusion, seed);
}

Model build_model(const ModelConfig& config, const nas::SearchSpace& space,
                  const nas::ArchitectureGene& gene, std::uint64_t seed) {
  return build_model(config, nas::to_architecture(space, gene, config), seed);
}

Model extract_subnet(Model& supernet, const Architecture& arch) {
  Model sub = build_model(supernet.config, arch, 0);
  std::map<std::string, Parameter*> params;
  std::map<std::string, Tensor*> buffers;
  supernet.visit({[&](Parameter& p) { params[p.name] = &p; },
                  [&](const std::string& name, Tensor& t) { buffers[name] = &t; }});
  auto copy = [](const std::string& name, Tensor& dst, const Tensor* src) {
    if (!src || !src->shape().contains(dst.shape())) {
      throw std::logic_error("extract_subnet: no supernet slice for " + name);
    }
    dst = src->prefix(dst.shape());
  };
  sub.visit({[&](Parameter& p) {
               auto it = params.find(p.name);
               copy(p.name, p.value, it == params.end() ? nullptr : &it->second->value);
             },
             [&](const std::string& name, Tensor& t) {
               auto it = buffers.find(name);
               copy(name, t, it == buffers.end() ? nullptr : it->second);
             }});
  return sub;
}

Batch make_batch(const std::vector<const io::Sample*>& samples,
                 const std::vector<bool>& flip) {
  if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
  if (!flip.empty() && flip.size() != samples.size()) {
    throw std::invalid_argument("make_batch: flip mask size mismatch");
  }
  const Shape hs = samples[0]->pair.heatmap.shape();
  const int n = static_cast<int>(samples.size());
  Batch b;
  b.heat = Tensor(Shape{n, 3, hs.h, hs.w});
  b.gray = Tensor(Shape{n, 1, hs.h, hs.w});
  const std::size_t heat_sz = 3 * static_cast<std::size_t>(hs.h) * hs.w;
  const std::size_t gray_sz = static_cast<std::size_t>(hs.h) * hs.w;
  for (int i = 0; i < n; ++i) {
    const io::Sample& s = *samples[i];
    if (!(s.pair.heatmap.shape() == hs)) {
      throw std::invalid_argument("make_batch: sample " + s.sample_id +
                                  " has a different size");
    }
    const bool f = !flip.empty() && flip[i];
    Tensor heat = f ? ops::flip_w(s.pair.heatmap) : s.pair.heatmap;
    Tensor gray = f ? ops::flip_w(s.pair.grayscale) : s.pair.grayscale;
    std::copy(heat.data(), heat.data() + heat_sz, b.heat.data() + i * heat_sz);
    std::copy(gray.data(), gray.data() + gray_sz, b.gray.data() + i * gray_sz);
    auto labels = s.labels;
    if (f) {
      for (auto& a : labels) a.cx = 1.0 - a.cx;
    }
    b.labels.push_back(std::move(labels));
  }
  return b;
}

DetectionOutput forward_dual_branch(Model& model, const Batch& batch,
                                    const Architecture& arch,
                                    const nn::ForwardContext& ctx,
                                    bool detach_adapter) {
  const Shape s = batch.heat.shape();
  if (s.h % 32 != 0 || s.w % 32 != 0) {
    throw std::invalid_argument("forward_dual_branch: input " + std::to_string(s.h) +
                                "x" + std::to_string(s.w) +
                                " not divisible by 32");
  }
  auto pick = [&](Representation r) {
    return constant(r == Representation::kHeat ? batch.heat : batch.gray);
  };
  return model.forward(pick(model.config.backbone_input),
                       pick(model.config.adapter_input), arch, ctx, detach_adapter);
}

}  // namespace radnas::detector
