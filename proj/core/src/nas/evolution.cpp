#include "radnas/nas/evolution.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace radnas::nas {

void SearchConfig::validate() const {
  std::vector<std::string> v;
  if (population < 1) v.push_back("population must be >= 1");
  if (iterations < 1) v.push_back("iterations must be >= 1");
  if (top_k < 1) v.push_back("top_k must be >= 1");
  if (top_k > population) {
    v.push_back("top_k (" + std::to_string(top_k) + ") exceeds population (" +
                std::to_string(population) + ")");
  }
  if (!(mutation_prob >= 0 && mutation_prob <= 1)) {
    v.push_back("mutation_prob must lie in [0,1]");
  }
  if (max_params && *max_params < 1) v.push_back("max_params must be positive");
  if (max_flops && *max_flops < 1) v.push_back("max_flops must be positive");
  if (!v.empty()) {
    std::string msg = "search config:";
    for (const auto& s : v) msg += " " + s + ";";
    throw std::invalid_argument(msg);
  }
}

bool SearchConfig::feasible(std::int64_t params, std::int64_t flops) const {
  return (!max_params || params <= *max_params) && (!max_flops || flops <= *max_flops);
}

std::string SearchConfig::constraint_str() const {
  std::string s;
  if (max_params) s += "max_params=" + std::to_string(*max_params);
  if (max_flops) s += std::string(s.empty() ? "" : ", ") + "max_flops=" + std::to_string(*max_flops);
  return s.empty() ? "none" : s;
}

bool ranks_before(const Candidate& a, const Candidate& b) {
  const double fa = a.fitness.value_or(-1e300);
  const double fb = b.fitness.value_or(-1e300);
  if (fa != fb) return fa > fb;
  if (a.cost.params != b.cost.params) return a.cost.params < b.cost.params;
  return a.order < b.order;
}

SearchResult evolve_search(const SearchSpace& space, const SearchConfig& config,
                           const FitnessFn& fitness, const CostFn& cost) {
  config.validate();
  space.validate();
  std::mt19937_64 rng(config.seed);
  std::map<ArchitectureGene, double> cache;
  std::map<ArchitectureGene, Cost> cost_cache;
  std::uint64_t next_order = 0;
  SearchResult result;

  auto cost_of = [&](const ArchitectureGene& g) {
    auto it = cost_cache.find(g);
    if (it == cost_cache.end()) it = cost_cache.emplace(g, cost(g)).first;
    return it->second;
  };
  auto is_feasible = [&](const ArchitectureGene& g) {
    const Cost c = cost_of(g);
    return config.feasible(c.params, c.flops);
  };

  std::vector<Candidate> pop;
  std::set<ArchitectureGene> members;
  auto admit = [&](ArchitectureGene g, int iteration) {
    members.insert(g);
    Candidate c;
    c.cost = cost_of(g);
    c.gene = std::move(g);
    c.iteration = iteration;
    c.order = next_order++;
    pop.push_back(std::move(c));
  };

  const int max_init = 10 * config.population;
  for (int attempt = 0; attempt < max_init &&
                        static_cast<int>(pop.size()) < config.population;
       ++attempt) {
    auto g = sample_uniform(space, rng);
    if (!members.count(g) && is_feasible(g)) admit(std::move(g), 0);
  }
  if (static_cast<int>(pop.size()) < config.population) {
    throw std::runtime_error("evolve_search: found only " + std::to_string(pop.size()) +
                             " of " + std::to_string(config.population) +
                             " distinct feasible genes in " + std::to_string(max_init) +
                             " draws under constraint " + config.constraint_str());
  }
  result.population_sizes.push_back(static_cast<int>(pop.size()));

  for (int it = 0; it < config.iterations; ++it) {
    for (auto& c : pop) {
      if (c.fitness) continue;
      auto hit = cache.find(c.gene);
      if (hit == cache.end()) {
        const double f = fitness(c.gene);
        hit = cache.emplace(c.gene, f).first;
        result.log.push_back({it, gene_id(c.gene), f, c.cost.params, c.cost.flops});
      }
      c.fitness = hit->second;
    }
    std::stable_sort(pop.begin(), pop.end(), ranks_before);
    result.best_fitness.push_back(*pop.front().fitness);
    if (it + 1 == config.iterations) break;

    pop.resize(config.top_k);
    const std::vector<Candidate> parents = pop;
    const int need = config.population - config.top_k;
    const int n_cross = need / 2;
    std::uniform_int_distribution<int> pick(0, config.top_k - 1);
    // Each slot tries its own operator first; when the top k are closed under
    // it the slot falls back to mutation, then to fresh uniform samples.
    constexpr int kTriesPerStage = 50;
    for (int made = 0; made < need; ++made) {
      bool placed = false;
      for (int tries = 0; tries < 3 * kTriesPerStage && !placed; ++tries) {
        const int stage = tries / kTriesPerStage;
        ArchitectureGene child;
        if (stage == 0 && made < n_cross) {
          const int a = pick(rng);
          int b = pick(rng);
          if (config.top_k > 1) {
            while (b == a) b = pick(rng);
          }
          child = crossover(space, parents[a].gene, parents[b].gene, rng);
        } else if (stage <= 1) {
          child = mutate(space, parents[pick(rng)].gene, config.mutation_prob, rng);
        } else {
          child = sample_uniform(space, rng);
        }
        if (members.count(child) || !is_feasible(child)) continue;
        admit(std::move(child), it + 1);
        placed = true;
      }
      if (!placed) {
        throw std::runtime_error("evolve_search: cannot produce distinct feasible offspring "
                                 "under constraint " + config.constraint_str());
      }
    }
    result.population_sizes.push_back(static_cast<int>(pop.size()));
  }
  result.ranked = pop;
  return result;
}

}  // namespace radnas::nas
