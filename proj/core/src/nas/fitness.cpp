#include "radnas/nas/fitness.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace radnas::nas {

double evaluate_fitness(detector::Model& supernet, const SearchSpace& space,
                        const ArchitectureGene& gene,
                        const std::vector<io::Sample>& val,
                        const std::vector<detector::Batch>& recalib,
                        const FitnessOptions& options) {
  if (val.empty()) throw std::invalid_argument("evaluate_fitness: empty validation set");
  const auto arch = to_architecture(space, gene, supernet.config);
  detector::Model subnet = detector::extract_subnet(supernet, arch);
  const auto full = subnet.full_arch();
  if (recalib.empty()) {
    std::cerr << "warning: empty recalibration set, using inherited statistics\n";
  } else {
    detector::recalibrate_norm(subnet, full, recalib);
  }
  const auto report = detector::evaluate(subnet, full, val, options.batch_size, options.decode);
  return std::clamp(report.map50, 0.0, 1.0);
}

}  // namespace radnas::nas
