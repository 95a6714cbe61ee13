#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "radnas/detector/decode.hpp"
#include "radnas/detector/loss.hpp"
#include "radnas/detector/model.hpp"
#include "radnas/eval/metrics.hpp"
#include "radnas/nas/search_space.hpp"

namespace radnas::detector {

struct TrainHyper {
  int epochs = 300;
  int batch_size = 64;
  double lr = 0.01;
  double final_lr_fraction = 0.01;  // linear decay to lr * fraction
  double momentum = 0.9;
  double weight_decay = 5e-4;  // conv weights only
  double grad_clip = 10.0;     // global L2 norm; <= 0 disables
  bool hflip = true;           // mirror along Doppler with probability 1/2
  std::uint64_t seed = 0;
  int max_steps = 0;  // > 0 caps the total number of optimizer steps
};

// Thrown when the loss or a gradient becomes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(int step)
      : std::runtime_error("training diverged at step " + std::to_string(step)),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct TrainLog {
  std::vector<double> loss;  // per step
  std::vector<nas::ArchitectureGene> genes;  // supernet: sampled gene per step
  int steps = 0;
};

// SGD with momentum that touches only the gradient-bearing prefix of each
// parameter.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), decay_(weight_decay) {}
  // Clips the global norm (if clip > 0), applies the update and clears grads.
  // Returns the pre-clip gradient norm.
  double step(const std::vector<Parameter*>& params, double lr, double clip);

 private:
  double momentum_;
  double decay_;
};

// One forward/backward/update on a batch. Throws TrainingDiverged(step) on a
// non-finite loss.
LossBreakdown train_step(Model& model, const Batch& batch, const Architecture& arch,
                         Sgd& opt, const std::vector<Parameter*>& params, double lr,
                         double clip, int step);

// Sampled-path supernet training: each step draws one gene uniformly from
// `space` with a generator seeded from hyper.seed.
TrainLog train_supernet(Model& supernet, const nas::SearchSpace& space,
                        const std::vector<io::Sample>& data, const TrainHyper& hyper);

// Fixed-architecture training of a standalone model at its full widths.
TrainLog train_fixed(Model& model, const std::vector<io::Sample>& data,
                     const TrainHyper& hyper);

// Gene sequence train_supernet draws for a given seed.
std::vector<nas::ArchitectureGene> sampled_gene_sequence(const nas::SearchSpace& space,
                                                         std::uint64_t seed, int steps);

std::vector<Batch> make_batches(const std::vector<io::Sample>& data, int batch_size,
                                std::size_t max_batches = 0);

// Resets the slice's running statistics and replaces them with the
// cumulative average of batch statistics over `batches`.
void recalibrate_norm(Model& model, const Architecture& arch,
                      const std::vector<Batch>& batches);

std::vector<std::vector<eval::ScoredDetection>> predict(
    Model& model, const Architecture& arch, const std::vector<io::Sample>& data,
    int batch_size = 32, const DecodeOptions& options = {});

eval::MAPReport evaluate(Model& model, const Architecture& arch,
                         const std::vector<io::Sample>& data, int batch_size = 32,
                         const DecodeOptions& options = {});

}  // namespace radnas::detector
