#include "radnas/detector/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace radnas::detector {

namespace {

constexpr std::uint64_t kGeneStreamSalt = 0x9E3779B97F4A7C15ull;

// Calls f(index) for every element of the leading `extent` block of `t`.
template <typename F>
void for_prefix(const Tensor& t, const Shape& extent, F&& f) {
  for (int n = 0; n < extent.n; ++n) {
    for (int c = 0; c < extent.c; ++c) {
      for (int h = 0; h < extent.h; ++h) {
        const std::size_t base = t.offset(n, c, h, 0);
        for (int w = 0; w < extent.w; ++w) f(base + w);
      }
    }
  }
}

bool touched(const Parameter& p) { return p.touched.numel() > 0; }

using ArchForStep = std::function<Architecture(int step, TrainLog& log)>;

TrainLog run_training(Model& model, const std::vector<io::Sample>& data,
                      const TrainHyper& hyper, const ArchForStep& arch_for_step) {
  if (data.empty()) throw std::invalid_argument("training: empty dataset");
  if (hyper.batch_size < 1 || hyper.epochs < 1) {
    throw std::invalid_argument("training: batch_size and epochs must be >= 1");
  }
  const int n = static_cast<int>(data.size());
  const int bs = std::min(hyper.batch_size, n);
  const int steps_per_epoch = (n + bs - 1) / bs;
  int total = hyper.epochs * steps_per_epoch;
  if (hyper.max_steps > 0) total = std::min(total, hyper.max_steps);

  std::mt19937_64 rng(hyper.seed);
  std::bernoulli_distribution coin(0.5);
  Sgd opt(hyper.momentum, hyper.weight_decay);
  const auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();

  TrainLog log;
  std::vector<int> order(n);
  int step = 0;
  while (step < total) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n && step < total; start += bs) {
      std::vector<const io::Sample*> picked;
      std::vector<bool> flip;
      for (int j = start; j < std::min(n, start + bs); ++j) {
        picked.push_back(&data[order[j]]);
        flip.push_back(hyper.hflip && coin(rng));
      }
      const Batch batch = make_batch(picked, flip);
      const Architecture arch = arch_for_step(step, log);
      const double lr =
          hyper.lr * (1.0 - (1.0 - hyper.final_lr_fraction) * step / std::max(1, total));
      const auto lb = train_step(model, batch, arch, opt, params, lr, hyper.grad_clip, step);
      log.loss.push_back(lb.total);
      ++step;
    }
  }
  log.steps = step;
  return log;
}

}  // namespace

double Sgd::step(const std::vector<Parameter*>& params, double lr, double clip) {
  double sq = 0;
  for (Parameter* p : params) {
    if (!touched(*p)) continue;
    for_prefix(p->grad, p->touched, [&](std::size_t i) { sq += p->grad[i] * p->grad[i]; });
  }
  const double norm = std::sqrt(sq);
  const double factor = (clip > 0 && norm > clip) ? clip / norm : 1.0;
  for (Parameter* p : params) {
    if (!touched(*p)) continue;
    if (p->velocity.empty()) p->velocity = Tensor(p->value.shape(), 0.0);
    const double wd = p->decay ? decay_ : 0.0;
    for_prefix(p->value, p->touched, [&](std::size_t i) {
      const double g = factor * p->grad[i] + wd * p->value[i];
      p->velocity[i] = momentum_ * p->velocity[i] + g;
      p->value[i] -= lr * p->velocity[i];
      p->grad[i] = 0.0;
    });
    p->touched = Shape{0, 0, 0, 0};
  }
  return norm;
}

LossBreakdown train_step(Model& model, const Batch& batch, const Architecture& arch,
                         Sgd& opt, const std::vector<Parameter*>& params, double lr,
                         double clip, int step) {
  const auto out = forward_dual_branch(model, batch, arch, nn::ForwardContext::train());
  LossBreakdown lb = compute_loss(out, batch.labels);
  if (!std::isfinite(lb.total)) throw TrainingDiverged(step);
  backward(lb.total_var);
  const double norm = opt.step(params, lr, clip);
  if (!std::isfinite(norm)) throw TrainingDiverged(step);
  lb.total_var.reset();
  return lb;
}

std::vector<nas::ArchitectureGene> sampled_gene_sequence(const nas::SearchSpace& space,
                                                         std::uint64_t seed, int steps) {
  std::mt19937_64 rng(seed ^ kGeneStreamSalt);
  std::vector<nas::ArchitectureGene> out;
  for (int i = 0; i < steps; ++i) out.push_back(nas::sample_uniform(space, rng));
  return out;
}

TrainLog train_supernet(Model& supernet, const nas::SearchSpace& space,
                        const std::vector<io::Sample>& data, const TrainHyper& hyper) {
  std::mt19937_64 gene_rng(hyper.seed ^ kGeneStreamSalt);
  return run_training(supernet, data, hyper, [&](int, TrainLog& log) {
    auto gene = nas::sample_uniform(space, gene_rng);
    auto arch = nas::to_architecture(space, gene, supernet.config);
    log.genes.push_back(std::move(gene));
    return arch;
  });
}

TrainLog train_fixed(Model& model, const std::vector<io::Sample>& data,
                     const TrainHyper& hyper) {
  const Architecture arch = model.full_arch();
  return run_training(model, data, hyper, [&](int, TrainLog&) { return arch; });
}

std::vector<Batch> make_batches(const std::vector<io::Sample>& data, int batch_size,
                                std::size_t max_batches) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size < 1");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    if (max_batches > 0 && out.size() >= max_batches) break;
    std::vector<const io::Sample*> picked;
    for (std::size_t j = start; j < std::min(data.size(), start + batch_size); ++j) {
      picked.push_back(&data[j]);
    }
    out.push_back(make_batch(picked));
  }
  return out;
}

void recalibrate_norm(Model& model, const Architecture& arch,
                      const std::vector<Batch>& batches) {
  NoGradGuard guard;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    forward_dual_branch(model, batches[i], arch,
                        nn::ForwardContext::recalibrate(static_cast<int>(i)));
  }
}

std::vector<std::vector<eval::ScoredDetection>> predict(
    Model& model, const Architecture& arch, const std::vector<io::Sample>& data,
    int batch_size, const DecodeOptions& options) {
  NoGradGuard guard;
  std::vector<std::vector<eval::ScoredDetection>> preds;
  for (const Batch& b : make_batches(data, batch_size)) {
    auto dets = decode(forward_dual_branch(model, b, arch, nn::ForwardContext::eval()),
                       options);
    for (auto& d : dets) preds.push_back(std::move(d));
  }
  return preds;
}

eval::MAPReport evaluate(Model& model, const Architecture& arch,
                         const std::vector<io::Sample>& data, int batch_size,
                         const DecodeOptions& options) {
  auto preds = predict(model, arch, data, batch_size, options);
  std::vector<std::vector<eval::GroundTruth>> gts;
  for (const auto& s : data) gts.push_back(eval::to_ground_truth(s.labels));
  return eval::map_report(preds, gts, model.config.num_classes);
}

}  // namespace radnas::detector
