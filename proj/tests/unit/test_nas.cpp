#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "radnas/detector/model.hpp"
#include "radnas/detector/trainer.hpp"
#include "radnas/nas/cost_model.hpp"
#include "radnas/nas/evolution.hpp"
#include "radnas/nas/fitness.hpp"
#include "radnas/nas/gene_io.hpp"
#include "radnas/nas/search_space.hpp"

using namespace radnas;
using namespace radnas::nas;
using detector::ModelConfig;
using detector::Variant;

namespace {

ModelConfig config_for(Variant v) {
  ModelConfig c = fixture::desk_model_config();
  c.variant = v;
  return c;
}

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  while (e-- > 0) r *= b;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

CostFn cost_fn(const SearchSpace& space, const ModelConfig& cfg) {
  return [&space, cfg](const ArchitectureGene& g) {
    return Cost{count_params(space, g, cfg), estimate_flops(space, g, cfg, 64, 64)};
  };
}

// Deterministic pseudo-random fitness keyed on the gene.
double hashed_fitness(const ArchitectureGene& g) {
  std::uint64_t h = 1469598103934665603ull;
  for (int c : g.choices) h = (h ^ static_cast<std::uint64_t>(c + 1)) * 1099511628211ull;
  return static_cast<double>(h % 100000) / 100000.0;
}

}  // namespace

TEST(SearchSpace, DefaultCardinality) {
  const auto space = default_space(config_for(Variant::kFull));
  EXPECT_EQ(space.blocks.size(), 18u);
  EXPECT_EQ(space.cardinality(), 2293235712ull);
  EXPECT_EQ(space.cardinality(), ipow(2, 20) * ipow(3, 7));
}

TEST(SearchSpace, VariantCardinalities) {
  EXPECT_EQ(default_space(config_for(Variant::kMode1Only)).cardinality(),
            ipow(2, 20) * ipow(3, 4));
  EXPECT_EQ(default_space(config_for(Variant::kStemOnly)).cardinality(), ipow(2, 20));
  EXPECT_EQ(default_space(config_for(Variant::kBaseline)).cardinality(), ipow(2, 14));
}

TEST(SearchSpace, ReducedSpaceEnumeration) {
  const auto space = reduced_space(config_for(Variant::kFull));
  EXPECT_EQ(space.cardinality(), 576u);
  const auto all = enumerate_genes(space);
  ASSERT_EQ(all.size(), 576u);
  EXPECT_EQ(std::set<ArchitectureGene>(all.begin(), all.end()).size(), 576u);
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  for (const auto& g : all) EXPECT_NO_THROW(validate_gene(space, g));
}

TEST(SearchSpace, HashDistinguishesSpaces) {
  const auto a = default_space(config_for(Variant::kFull));
  const auto b = default_space(config_for(Variant::kMode1Only));
  EXPECT_EQ(a.hash(), default_space(config_for(Variant::kFull)).hash());
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_NE(a.hash(), reduced_space(config_for(Variant::kFull)).hash());
}

TEST(SearchSpace, ValidateGeneNamesBlocks) {
  const auto space = default_space(config_for(Variant::kFull));
  ArchitectureGene g = full_width_gene(space);
  g.choices.pop_back();
  EXPECT_THROW(validate_gene(space, g), std::invalid_argument);
  g = full_width_gene(space);
  const int i = space.index_of("neck.2");
  ASSERT_GE(i, 0);
  g.choices[i] = 9;
  try {
    validate_gene(space, g);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("neck.2"), std::string::npos) << e.what();
  }
}

TEST(SearchSpace, SamplingIsSeeded) {
  const auto space = default_space(config_for(Variant::kFull));
  std::mt19937_64 a(7), b(7), c(8);
  std::vector<ArchitectureGene> ga, gb, gc;
  for (int i = 0; i < 20; ++i) {
    ga.push_back(sample_uniform(space, a));
    gb.push_back(sample_uniform(space, b));
    gc.push_back(sample_uniform(space, c));
  }
  EXPECT_EQ(ga, gb);
  EXPECT_NE(ga, gc);
}

TEST(SearchSpace, SamplingIsUniformPerBlock) {
  const auto space = default_space(config_for(Variant::kFull));
  std::mt19937_64 rng(11);
  const int n = 10000;
  std::vector<std::vector<int>> counts(space.blocks.size());
  for (std::size_t b = 0; b < space.blocks.size(); ++b) {
    counts[b].assign(space.blocks[b].options.size(), 0);
  }
  for (int i = 0; i < n; ++i) {
    const auto g = sample_uniform(space, rng);
    for (std::size_t b = 0; b < g.choices.size(); ++b) ++counts[b][g.choices[b]];
  }
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double p = 1.0 / counts[b].size();
    const double sigma = std::sqrt(n * p * (1 - p));
    for (int c : counts[b]) EXPECT_NEAR(c, n * p, 4 * sigma) << space.blocks[b].id;
  }
}

TEST(SearchSpace, CrossoverTakesEachBlockFromAParent) {
  const auto space = default_space(config_for(Variant::kFull));
  std::mt19937_64 rng(3);
  int from_a = 0, differing = 0;
  for (int t = 0; t < 500; ++t) {
    const auto a = sample_uniform(space, rng);
    const auto b = sample_uniform(space, rng);
    const auto child = crossover(space, a, b, rng);
    ASSERT_EQ(child.choices.size(), a.choices.size());
    for (std::size_t i = 0; i < a.choices.size(); ++i) {
      ASSERT_TRUE(child.choices[i] == a.choices[i] || child.choices[i] == b.choices[i]);
      if (a.choices[i] != b.choices[i]) {
        ++differing;
        from_a += child.choices[i] == a.choices[i];
      }
    }
    EXPECT_EQ(crossover(space, a, a, rng), a);
  }
  const double sigma = std::sqrt(differing * 0.25);
  EXPECT_NEAR(from_a, differing * 0.5, 4 * sigma);
}

TEST(SearchSpace, MutationProbabilityLimits) {
  const auto space = default_space(config_for(Variant::kFull));
  std::mt19937_64 rng(5);
  const auto g = sample_uniform(space, rng);
  for (int t = 0; t < 100; ++t) EXPECT_EQ(mutate(space, g, 0.0, rng), g);
  // With prob 1 every block is redrawn uniformly, so it keeps its option at
  // rate 1/|options|.
  const int n = 4000;
  std::vector<int> kept(space.blocks.size(), 0);
  for (int t = 0; t < n; ++t) {
    const auto m = mutate(space, g, 1.0, rng);
    validate_gene(space, m);
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i] += m.choices[i] == g.choices[i];
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double p = 1.0 / space.blocks[i].options.size();
    EXPECT_NEAR(kept[i], n * p, 4 * std::sqrt(n * p * (1 - p))) << space.blocks[i].id;
  }
  EXPECT_THROW(mutate(space, g, 1.5, rng), std::invalid_argument);
}

TEST(SearchSpace, MutationExpectedChanges) {
  const auto space = default_space(config_for(Variant::kFull));
  const double prob = 0.1;
  double expect = 0, var = 0;
  for (const auto& b : space.blocks) {
    const double q = prob * (1.0 - 1.0 / b.options.size());
    expect += q;
    var += q * (1 - q);
  }
  std::mt19937_64 rng(21);
  const int n = 10000;
  double total = 0;
  for (int t = 0; t < n; ++t) {
    const auto g = sample_uniform(space, rng);
    const auto m = mutate(space, g, prob, rng);
    for (std::size_t i = 0; i < g.choices.size(); ++i) total += g.choices[i] != m.choices[i];
  }
  EXPECT_NEAR(total / n, expect, 4 * std::sqrt(var / n));
}

TEST(SearchSpace, ToArchitectureRealizesWidths) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = default_space(cfg);
  EXPECT_EQ(to_architecture(space, full_width_gene(space), cfg),
            detector::full_architecture(cfg));
  ArchitectureGene g = full_width_gene(space);
  g.choices[space.index_of("backbone.4")] = 0;  // 1/4 of 64
  g.choices[space.index_of("backbone.1")] = 0;  // 1/2 of 8
  g.choices[space.index_of("exchanger.3")] = 1;
  const auto arch = to_architecture(space, g, cfg);
  EXPECT_EQ(arch.backbone[3], 16);
  EXPECT_EQ(arch.backbone[0], 4);
  EXPECT_EQ(arch.fusion[2], nn::FusionOption::kSum);
  // Sites outside the reduced space keep full width.
  const auto reduced = reduced_space(cfg);
  const auto rarch = to_architecture(reduced, enumerate_genes(reduced).front(), cfg);
  EXPECT_EQ(rarch.backbone[0], 8);
  EXPECT_EQ(rarch.backbone[2], 16);
  EXPECT_EQ(rarch.stem, cfg.stem_widths);
}

TEST(CostModel, ClosedForms) {
  EXPECT_EQ(conv_params(4, 8, 1, true, false), 40);
  EXPECT_EQ(conv_params(4, 8, 1, true, true), 56);
  EXPECT_EQ(conv_params(4, 8, 3, false, true), 4 * 8 * 9 + 16);
  EXPECT_EQ(conv_flops(4, 8, 1, 16, 16), 16384);
  EXPECT_EQ(conv_flops(3, 5, 3, 7, 9), 2ll * 3 * 5 * 9 * 7 * 9);
}

TEST(CostModel, ParamsMatchBuiltModels) {
  for (Variant v : {Variant::kFull, Variant::kMode1Only, Variant::kStemOnly, Variant::kBaseline}) {
    const auto cfg = config_for(v);
    const auto space = default_space(cfg);
    std::mt19937_64 rng(static_cast<int>(v) + 100);
    for (int t = 0; t < 5; ++t) {
      const auto g = sample_uniform(space, rng);
      auto m = detector::build_model(cfg, space, g, 1);
      EXPECT_EQ(static_cast<std::int64_t>(m.parameter_count()), count_params(space, g, cfg))
          << detector::to_string(v) << " " << gene_to_string(space, g);
    }
  }
}

TEST(CostModel, InventorySumsToTotals) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = default_space(cfg);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto g = sample_uniform(space, rng);
    const auto arch = to_architecture(space, g, cfg);
    std::int64_t p = 0, f = 0;
    for (const auto& l : layer_inventory(cfg, arch, 64, 64)) {
      if (l.kernel > 0) {
        std::int64_t lp = 0, lf = 0;
        for (std::size_t i = 0; i < l.in_channels.size(); ++i) {
          lp += conv_params(l.in_channels[i], l.out_channels, l.kernel, l.bias && i == 0,
                            l.norm && i == 0);
          lf += conv_flops(l.in_channels[i], l.out_channels, l.kernel, l.out_h, l.out_w);
        }
        EXPECT_EQ(l.params, lp) << l.name;
        EXPECT_EQ(l.flops, lf) << l.name;
      }
      p += l.params;
      f += l.flops;
    }
    EXPECT_EQ(p, count_params(cfg, arch));
    EXPECT_EQ(f, estimate_flops(cfg, arch, 64, 64));
  }
}

TEST(CostModel, FlopsScaleWithArea) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = default_space(cfg);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto arch = to_architecture(space, sample_uniform(space, rng), cfg);
    const auto small = layer_inventory(cfg, arch, 64, 64);
    const auto big = layer_inventory(cfg, arch, 128, 128);
    ASSERT_EQ(small.size(), big.size());
    for (std::size_t i = 0; i < small.size(); ++i) {
      // Attention convs act on pooled strips that grow with one side only.
      const int factor = small[i].out_w == 1 ? 2 : 4;
      EXPECT_EQ(big[i].flops, factor * small[i].flops) << small[i].name;
    }
  }
}

TEST(CostModel, MonotoneInWidth) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = default_space(cfg);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto g = sample_uniform(space, rng);
    for (std::size_t b = 0; b < space.blocks.size(); ++b) {
      if (space.blocks[b].kind != BlockKind::kWidth) continue;
      if (g.choices[b] + 1 >= static_cast<int>(space.blocks[b].options.size())) continue;
      ArchitectureGene wider = g;
      ++wider.choices[b];
      EXPECT_GT(count_params(space, wider, cfg), count_params(space, g, cfg))
          << space.blocks[b].id;
      EXPECT_GT(estimate_flops(space, wider, cfg, 64, 64), estimate_flops(space, g, cfg, 64, 64))
          << space.blocks[b].id;
    }
  }
}

TEST(Evolution, FindsMinimumParamsGene) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = reduced_space(cfg);
  const auto cost = cost_fn(space, cfg);
  ArchitectureGene best;
  double best_f = -1e300;
  for (const auto& g : enumerate_genes(space)) {
    const double f = -static_cast<double>(count_params(space, g, cfg));
    if (f > best_f) best_f = f, best = g;
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SearchConfig sc;
    sc.population = 20;
    sc.iterations = 10;
    sc.top_k = 6;
    sc.seed = seed;
    const auto res = evolve_search(
        space, sc, [&](const ArchitectureGene& g) {
          return -static_cast<double>(count_params(space, g, cfg));
        }, cost);
    EXPECT_EQ(res.ranked.front().gene, best) << "seed " << seed;
  }
}

TEST(Evolution, RunInvariants) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = reduced_space(cfg);
  SearchConfig sc;
  sc.population = 16;
  sc.iterations = 8;
  sc.top_k = 5;
  sc.seed = 12;
  std::map<ArchitectureGene, int> calls;
  const auto res = evolve_search(
      space, sc, [&](const ArchitectureGene& g) { ++calls[g]; return hashed_fitness(g); },
      cost_fn(space, cfg));
  ASSERT_EQ(res.best_fitness.size(), 8u);
  for (std::size_t i = 1; i < res.best_fitness.size(); ++i) {
    EXPECT_GE(res.best_fitness[i], res.best_fitness[i - 1]);
  }
  for (int s : res.population_sizes) EXPECT_EQ(s, 16);
  EXPECT_EQ(res.ranked.size(), 16u);
  EXPECT_TRUE(std::is_sorted(res.ranked.begin(), res.ranked.end(), ranks_before));
  for (const auto& [g, n] : calls) EXPECT_EQ(n, 1);
  EXPECT_EQ(res.log.size(), calls.size());
  std::map<std::string, double> by_id;
  for (const auto& [g, n] : calls) by_id[gene_id(g)] = hashed_fitness(g);
  for (const auto& row : res.log) EXPECT_EQ(row.fitness, by_id.at(row.gene_id));
  EXPECT_EQ(res.best_fitness.back(), *res.ranked.front().fitness);

  const auto again = evolve_search(space, sc, hashed_fitness, cost_fn(space, cfg));
  ASSERT_EQ(again.log.size(), res.log.size());
  for (std::size_t i = 0; i < res.log.size(); ++i) {
    EXPECT_EQ(again.log[i].gene_id, res.log[i].gene_id);
  }
}

TEST(Evolution, RespectsConstraint) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = reduced_space(cfg);
  const auto cost = cost_fn(space, cfg);
  std::vector<std::int64_t> all;
  for (const auto& g : enumerate_genes(space)) all.push_back(cost(g).params);
  std::sort(all.begin(), all.end());
  SearchConfig sc;
  sc.population = 12;
  sc.iterations = 6;
  sc.top_k = 4;
  sc.max_params = all[all.size() / 2];
  const auto res = evolve_search(space, sc, hashed_fitness, cost);
  for (const auto& c : res.ranked) EXPECT_LE(c.cost.params, *sc.max_params);
  for (const auto& r : res.log) EXPECT_LE(r.params, *sc.max_params);
}

TEST(Evolution, InfeasibleConstraintNamesIt) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = reduced_space(cfg);
  SearchConfig sc;
  sc.population = 10;
  sc.iterations = 2;
  sc.top_k = 3;
  sc.max_params = 1;
  try {
    evolve_search(space, sc, hashed_fitness, cost_fn(space, cfg));
    FAIL() << "expected failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("max_params=1"), std::string::npos) << e.what();
  }
}

TEST(Evolution, ConfigValidationNamesFields) {
  SearchConfig sc;
  sc.population = 50;
  sc.top_k = 60;
  try {
    sc.validate();
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("top_k"), std::string::npos) << m;
    EXPECT_NE(m.find("population"), std::string::npos) << m;
  }
}

TEST(Fitness, DeterministicBoundedAndNonMutating) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = reduced_space(cfg);
  auto supernet = detector::build_supernet(cfg, 6);
  io::SynthConfig syn;
  const auto val = fixture::synth_samples(syn, 2, "val", 4);
  const auto recalib = detector::make_batches(fixture::synth_samples(syn, 2, "train", 4), 4);
  std::map<std::string, Tensor> before;
  supernet.visit({[&](Parameter& p) { before[p.name] = p.value; },
                  [&](const std::string& n, Tensor& t) { before[n] = t; }});
  std::mt19937_64 rng(1);
  for (int t = 0; t < 2; ++t) {
    const auto g = sample_uniform(space, rng);
    const double a = evaluate_fitness(supernet, space, g, val, recalib);
    const double b = evaluate_fitness(supernet, space, g, val, recalib);
    EXPECT_EQ(a, b);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  supernet.visit({[&](Parameter& p) { EXPECT_EQ(max_abs_diff(p.value, before.at(p.name)), 0.0); },
                  [&](const std::string& n, Tensor& t) {
                    EXPECT_EQ(max_abs_diff(t, before.at(n)), 0.0) << n;
                  }});
}

TEST(GeneIo, RoundTripAndHashCheck) {
  const auto cfg = config_for(Variant::kFull);
  const auto space = default_space(cfg);
  std::mt19937_64 rng(2);
  const auto dir = oracle::scratch_dir("gene_io");
  for (int t = 0; t < 10; ++t) {
    const auto g = sample_uniform(space, rng);
    EXPECT_EQ(parse_gene(space, format_gene(space, g)), g);
    write_gene_file(dir / "g.txt", space, g);
    EXPECT_EQ(read_gene_file(dir / "g.txt", space), g);
  }
  const auto other = default_space(config_for(Variant::kMode1Only));
  EXPECT_THROW(read_gene_file(dir / "g.txt", other), std::invalid_argument);

  const std::string text = format_gene(space, full_width_gene(space));
  const auto first_nl = text.find('\n');
  const auto second_nl = text.find('\n', first_nl + 1);
  const std::string entry = text.substr(first_nl + 1, second_nl - first_nl);
  EXPECT_THROW(parse_gene(space, text + entry), std::invalid_argument);
  EXPECT_THROW(parse_gene(space, text.substr(0, second_nl + 1)), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST(GeneIo, SearchLogCsv) {
  const auto dir = oracle::scratch_dir("search_log");
  write_search_log(dir / "log.csv", {{0, "abc", 0.5, 10, 20}, {1, "def", 0.25, 11, 21}});
  const std::string s = slurp(dir / "log.csv");
  std::istringstream is(s);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iteration,gene_id,fitness,params,flops");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 6), "0,abc,");
  EXPECT_NE(line.find(",10,20"), std::string::npos);
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 6), "1,def,");
  std::filesystem::remove_all(dir);
}
