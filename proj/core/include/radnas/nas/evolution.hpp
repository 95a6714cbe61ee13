#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "radnas/nas/search_space.hpp"

namespace radnas::nas {

struct SearchConfig {
  int population = 50;
  int iterations = 20;
  int top_k = 15;
  double mutation_prob = 0.1;
  std::optional<std::int64_t> max_params;
  std::optional<std::int64_t> max_flops;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending fields.
  void validate() const;
  bool feasible(std::int64_t params, std::int64_t flops) const;
  std::string constraint_str() const;
};

struct Cost {
  std::int64_t params = 0;
  std::int64_t flops = 0;
};

struct Candidate {
  ArchitectureGene gene;
  std::optional<double> fitness;  // set once evaluated
  Cost cost;
  int iteration = 0;        // iteration in which the gene entered the population
  std::uint64_t order = 0;  // insertion order across the run
};

struct SearchLogRow {
  int iteration = 0;
  std::string gene_id;
  double fitness = 0;
  std::int64_t params = 0;
  std::int64_t flops = 0;
};

struct SearchResult {
  std::vector<Candidate> ranked;      // final population, best first
  std::vector<SearchLogRow> log;      // one row per distinct evaluation
  std::vector<double> best_fitness;   // best in population after each iteration
  std::vector<int> population_sizes;  // after each refill
};

using FitnessFn = std::function<double(const ArchitectureGene&)>;
using CostFn = std::function<Cost(const ArchitectureGene&)>;

// Elitist evolutionary search. The population starts as P distinct feasible
// random genes (up to 10*P draws, else std::runtime_error naming the
// constraint). Each iteration evaluates new members (cached by gene), ranks
// by fitness desc, params asc, insertion order, keeps the top k and refills
// to P with equal shares of crossover and mutation children, resampling
// infeasible or duplicate children.
SearchResult evolve_search(const SearchSpace& space, const SearchConfig& config,
                           const FitnessFn& fitness, const CostFn& cost);

// Ranking order used by evolve_search.
bool ranks_before(const Candidate& a, const Candidate& b);

}  // namespace radnas::nas
