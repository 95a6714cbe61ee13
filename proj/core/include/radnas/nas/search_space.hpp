#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "radnas/detector/config.hpp"

namespace radnas::nas {

enum class BlockKind { kWidth, kFusion };

// One searchable site. Width blocks list fractions of the site's full width;
// fusion blocks list fusion options 1..3 (stored as doubles).
struct ChoiceBlockSpec {
  std::string id;  // backbone.N | stem.N | exchanger.N | neck.N
  BlockKind kind = BlockKind::kWidth;
  std::vector<double> options;
};

struct SearchSpace {
  std::vector<ChoiceBlockSpec> blocks;

  // Product of option counts; throws on overflow.
  std::uint64_t cardinality() const;
  // Hash of the canonical block/option listing.
  std::string hash() const;
  int index_of(const std::string& id) const;  // -1 if absent
  void validate() const;
};

// Option index per block, aligned with SearchSpace::blocks.
struct ArchitectureGene {
  std::vector<int> choices;
  friend bool operator==(const ArchitectureGene&, const ArchitectureGene&) = default;
  friend auto operator<=>(const ArchitectureGene&, const ArchitectureGene&) = default;
};

// The full search space over the model's searchable sites:
// backbone 1-2 {1/2,1}, backbone 3-5, stem 1-3 and neck 1-3 {1/4,1/2,3/4,1},
// and fusion {1,2,3} for every exchanger present in the variant.
SearchSpace default_space(const detector::ModelConfig& config);
// Desk-scale subset: backbone 3-5 and neck 1-3 over {1/2,1}, fusion of
// exchangers 1 and 7 over {1,2,3} (2^6 * 3^2 = 576 genes for the full variant).
SearchSpace reduced_space(const detector::ModelConfig& config);
SearchSpace space_by_name(const std::string& name, const detector::ModelConfig& config);

// Throws std::invalid_argument listing each offending block id.
void validate_gene(const SearchSpace& space, const ArchitectureGene& gene);

ArchitectureGene sample_uniform(const SearchSpace& space, std::mt19937_64& rng);
// Largest width / first fusion option (gated) per block.
ArchitectureGene full_width_gene(const SearchSpace& space);
ArchitectureGene crossover(const SearchSpace& space, const ArchitectureGene& a,
                           const ArchitectureGene& b, std::mt19937_64& rng);
ArchitectureGene mutate(const SearchSpace& space, const ArchitectureGene& a,
                        double prob, std::mt19937_64& rng);

// Realized widths and fusion options. Blocks outside the space take their
// full width and the gated fusion option.
detector::Architecture to_architecture(const SearchSpace& space,
                                       const ArchitectureGene& gene,
                                       const detector::ModelConfig& config);

std::string gene_to_string(const SearchSpace& space, const ArchitectureGene& gene);
// Short stable identifier for logs and caches.
std::string gene_id(const ArchitectureGene& gene);

// Enumerates every gene of the space in lexicographic order.
std::vector<ArchitectureGene> enumerate_genes(const SearchSpace& space);

}  // namespace radnas::nas
