#include "radnas/nas/search_space.hpp"

#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "radnas/nn/usconv.hpp"
#include "radnas/util/hash.hpp"

namespace radnas::nas {

using detector::ModelConfig;
using detector::Variant;

namespace {

const std::vector<double> kHalfOrFull{0.5, 1.0};
const std::vector<double> kQuarters{0.25, 0.5, 0.75, 1.0};
const std::vector<double> kFusionOptions{1, 2, 3};

ChoiceBlockSpec width_block(const std::string& id, const std::vector<double>& opts) {
  return {id, BlockKind::kWidth, opts};
}

bool has_stem(const ModelConfig& c) { return c.variant != Variant::kBaseline; }

// Splits "backbone.3" into ("backbone", 3).
std::pair<std::string, int> parse_id(const std::string& id) {
  const auto dot = id.find('.');
  if (dot == std::string::npos) throw std::invalid_argument("bad block id " + id);
  return {id.substr(0, dot), std::stoi(id.substr(dot + 1))};
}

}  // namespace

std::uint64_t SearchSpace::cardinality() const {
  std::uint64_t n = 1;
  for (const auto& b : blocks) {
    const std::uint64_t k = b.options.size();
    if (k != 0 && n > std::numeric_limits<std::uint64_t>::max() / k) {
      throw std::overflow_error("search space cardinality overflows 64 bits");
    }
    n *= k;
  }
  return n;
}

std::string SearchSpace::hash() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& b : blocks) {
    os << b.id << (b.kind == BlockKind::kWidth ? ":w:" : ":f:");
    for (double o : b.options) os << o << ",";
    os << ";";
  }
  return util::sha256_hex(os.str()).substr(0, 16);
}

int SearchSpace::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

void SearchSpace::validate() const {
  std::set<std::string> ids;
  for (const auto& b : blocks) {
    if (!ids.insert(b.id).second) throw std::invalid_argument("duplicate block " + b.id);
    if (b.options.size() < 2) {
      throw std::invalid_argument("block " + b.id + " needs >= 2 options");
    }
    std::set<double> distinct(b.options.begin(), b.options.end());
    if (distinct.size() != b.options.size()) {
      throw std::invalid_argument("block " + b.id + " has repeated options");
    }
    for (double o : b.options) {
      if (b.kind == BlockKind::kWidth && !(o > 0 && o <= 1)) {
        throw std::invalid_argument("block " + b.id + ": width outside (0,1]");
      }
      if (b.kind == BlockKind::kFusion && o != 1 && o != 2 && o != 3) {
        throw std::invalid_argument("block " + b.id + ": fusion option not 1..3");
      }
    }
  }
}

SearchSpace default_space(const ModelConfig& config) {
  SearchSpace s;
  for (int b = 1; b <= detector::kNumStages; ++b) {
    s.blocks.push_back(width_block("backbone." + std::to_string(b),
                                   b <= 2 ? kHalfOrFull : kQuarters));
  }
  if (has_stem(config)) {
    for (int i = 1; i <= 3; ++i) {
      s.blocks.push_back(width_block("stem." + std::to_string(i), kQuarters));
    }
  }
  for (const auto& site : detector::exchanger_layout(config)) {
    s.blocks.push_back(
        {"exchanger." + std::to_string(site.id), BlockKind::kFusion, kFusionOptions});
  }
  for (int i = 1; i <= detector::kNumNeckBlocks; ++i) {
    s.blocks.push_back(width_block("neck." + std::to_string(i), kQuarters));
  }
  return s;
}

SearchSpace reduced_space(const ModelConfig& config) {
  SearchSpace s;
  for (int b = 3; b <= detector::kNumStages; ++b) {
    s.blocks.push_back(width_block("backbone." + std::to_string(b), kHalfOrFull));
  }
  for (const auto& site : detector::exchanger_layout(config)) {
    if (site.id == 1 || site.id == 7) {
      s.blocks.push_back(
          {"exchanger." + std::to_string(site.id), BlockKind::kFusion, kFusionOptions});
    }
  }
  for (int i = 1; i <= detector::kNumNeckBlocks; ++i) {
    s.blocks.push_back(width_block("neck." + std::to_string(i), kHalfOrFull));
  }
  return s;
}

SearchSpace space_by_name(const std::string& name, const ModelConfig& config) {
  if (name == "default") return default_space(config);
  if (name == "reduced") return reduced_space(config);
  throw std::invalid_argument("unknown search space '" + name + "' (default|reduced)");
}

void validate_gene(const SearchSpace& space, const ArchitectureGene& gene) {
  if (gene.choices.size() != space.blocks.size()) {
    throw std::invalid_argument("gene has " + std::to_string(gene.choices.size()) +
                                " choices, space has " +
                                std::to_string(space.blocks.size()) + " blocks");
  }
  std::string bad;
  for (std::size_t i = 0; i < gene.choices.size(); ++i) {
    const int c = gene.choices[i];
    if (c < 0 || c >= static_cast<int>(space.blocks[i].options.size())) {
      bad += (bad.empty() ? "" : ", ") + space.blocks[i].id + "=" + std::to_string(c);
    }
  }
  if (!bad.empty()) throw std::invalid_argument("gene incompatible at blocks: " + bad);
}

ArchitectureGene sample_uniform(const SearchSpace& space, std::mt19937_64& rng) {
  ArchitectureGene g;
  g.choices.reserve(space.blocks.size());
  for (const auto& b : space.blocks) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(b.options.size()) - 1);
    g.choices.push_back(d(rng));
  }
  return g;
}

ArchitectureGene full_width_gene(const SearchSpace& space) {
  ArchitectureGene g;
  for (const auto& b : space.blocks) {
    if (b.kind == BlockKind::kFusion) {
      g.choices.push_back(0);
    } else {
      int best = 0;
      for (std::size_t i = 1; i < b.options.size(); ++i) {
        if (b.options[i] > b.options[best]) best = static_cast<int>(i);
      }
      g.choices.push_back(best);
    }
  }
  return g;
}

ArchitectureGene crossover(const SearchSpace& space, const ArchitectureGene& a,
                           const ArchitectureGene& b, std::mt19937_64& rng) {
  validate_gene(space, a);
  validate_gene(space, b);
  std::bernoulli_distribution coin(0.5);
  ArchitectureGene child;
  child.choices.resize(a.choices.size());
  for (std::size_t i = 0; i < a.choices.size(); ++i) {
    child.choices[i] = coin(rng) ? a.choices[i] : b.choices[i];
  }
  return child;
}

ArchitectureGene mutate(const SearchSpace& space, const ArchitectureGene& a,
                        double prob, std::mt19937_64& rng) {
  if (!(prob >= 0 && prob <= 1)) {
    throw std::invalid_argument("mutation probability outside [0,1]");
  }
  validate_gene(space, a);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ArchitectureGene out = a;
  for (std::size_t i = 0; i < out.choices.size(); ++i) {
    if (unit(rng) < prob) {
      std::uniform_int_distribution<int> d(
          0, static_cast<int>(space.blocks[i].options.size()) - 1);
      out.choices[i] = d(rng);
    }
  }
  return out;
}

detector::Architecture to_architecture(const SearchSpace& space,
                                       const ArchitectureGene& gene,
                                       const ModelConfig& config) {
  validate_gene(space, gene);
  detector::Architecture arch = detector::full_architecture(config);
  for (std::size_t i = 0; i < space.blocks.size(); ++i) {
    const auto& block = space.blocks[i];
    const double opt = block.options[gene.choices[i]];
    const auto [group, n] = parse_id(block.id);
    auto width = [&](int full) { return nn::realized_channels(opt, full); };
    if (group == "backbone" && n >= 1 && n <= detector::kNumStages) {
      arch.backbone[n - 1] = width(config.backbone_widths[n - 1]);
    } else if (group == "stem" && n >= 1 && n <= 3) {
      arch.stem[n - 1] = width(config.stem_widths[n - 1]);
    } else if (group == "neck" && n >= 1 && n <= detector::kNumNeckBlocks) {
      arch.neck[n - 1] = width(config.neck_widths[n - 1]);
    } else if (group == "exchanger" && n >= 1 && n <= detector::kMaxExchangers) {
      arch.fusion[n - 1] = nn::fusion_option_from_int(static_cast<int>(opt));
    } else {
      throw std::invalid_argument("block " + block.id + " does not exist in the model");
    }
  }
  return arch;
}

std::string gene_to_string(const SearchSpace& space, const ArchitectureGene& gene) {
  std::string out;
  for (std::size_t i = 0; i < space.blocks.size() && i < gene.choices.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%s=%g", i ? " " : "", space.blocks[i].id.c_str(),
                  space.blocks[i].options[gene.choices[i]]);
    out += buf;
  }
  return out;
}

std::string gene_id(const ArchitectureGene& gene) {
  std::string s;
  for (int c : gene.choices) s += std::to_string(c) + ",";
  return util::sha256_hex(s).substr(0, 12);
}

std::vector<ArchitectureGene> enumerate_genes(const SearchSpace& space) {
  std::vector<ArchitectureGene> out;
  ArchitectureGene g;
  g.choices.assign(space.blocks.size(), 0);
  const std::uint64_t total = space.cardinality();
  out.reserve(total);
  for (std::uint64_t k = 0; k < total; ++k) {
    out.push_back(g);
    for (std::size_t i = g.choices.size(); i-- > 0;) {
      if (++g.choices[i] < static_cast<int>(space.blocks[i].options.size())) break;
      g.choices[i] = 0;
    }
  }
  return out;
}

}  // namespace radnas::nas
