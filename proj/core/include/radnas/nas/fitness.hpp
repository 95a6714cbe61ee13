#pragma once

#include <vector>

#include "radnas/detector/trainer.hpp"
#include "radnas/nas/search_space.hpp"

namespace radnas::nas {

inline constexpr int kDefaultRecalibBatches = 20;

struct FitnessOptions {
  int batch_size = 32;  // inference batch size
  detector::DecodeOptions decode;
};

// Inherited-weight fitness: slices the gene's subnet out of the supernet,
// recalibrates its normalization statistics on `recalib` (skipped with a
// warning on stderr when empty), and returns validation mAP@50.
// The supernet itself is not modified.
double evaluate_fitness(detector::Model& supernet, const SearchSpace& space,
                        const ArchitectureGene& gene,
                        const std::vector<io::Sample>& val,
                        const std::vector<detector::Batch>& recalib,
                        const FitnessOptions& options = {});

}  // namespace radnas::nas
