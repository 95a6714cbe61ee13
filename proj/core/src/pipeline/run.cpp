#include "radnas/pipeline/run.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "radnas/detector/checkpoint.hpp"
#include "radnas/io/rdmap.hpp"
#include "radnas/nas/cost_model.hpp"
#include "radnas/nas/gene_io.hpp"
#include "radnas/util/hash.hpp"

#ifndef RADNAS_VERSION
#define RADNAS_VERSION "dev"
#endif

namespace radnas::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["config_copy"] = m.config_copy;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  auto list = [](const std::vector<ArtifactRecord>& xs) {
    json a = json::array();
    for (const auto& x : xs) a.push_back({{"path", x.path}, {"sha256", x.sha256}});
    return a;
  };
  j["inputs"] = list(m.inputs);
  j["artifacts"] = list(m.artifacts);
  j["versions"] = m.versions;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.config_copy = j.at("config_copy").get<std::string>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  auto list = [](const json& a) {
    std::vector<ArtifactRecord> out;
    for (const auto& x : a) out.push_back({x.at("path"), x.at("sha256")});
    return out;
  };
  m.inputs = list(j.at("inputs"));
  m.artifacts = list(j.at("artifacts"));
  m.versions = j.at("versions").get<std::map<std::string, std::string>>();
  return m;
}

fs::path output_root(const PipelineConfig& config) {
  if (const char* env = std::getenv("RADNAS_OUT"); env && *env) return fs::path(env);
  return fs::path(config.out_dir);
}

namespace {

class ConfigStageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

const std::vector<std::string> kSplits{"train", "val", "test"};

// Shared state of one stage invocation.
struct Stage {
  std::string command;
  PipelineConfig config;
  fs::path root;
  std::ostream& out;
  RunManifest manifest;

  fs::path abs(const std::string& rel) const { return root / rel; }
  fs::path manifest_path(const std::string& cmd) const {
    return root / layout::kRuns / (cmd + ".json");
  }

  void produced(const std::string& rel) {
    manifest.artifacts.push_back({rel, util::sha256_file(abs(rel))});
  }

  // Checks that `only` exists, then loads the upstream stage's manifest and
  // verifies every artifact it lists, recording them as inputs.
  RunManifest require(const std::string& cmd, const std::vector<std::string>& only = {}) {
    for (const auto& rel : only) {
      if (!fs::exists(abs(rel))) {
        throw MissingArtifact(command + ": missing upstream artifact " + abs(rel).string() +
                              " (run `radnas " + cmd + "` first)");
      }
    }
    const fs::path mp = manifest_path(cmd);
    if (!fs::exists(mp)) {
      throw MissingArtifact(command + ": missing upstream run manifest " + mp.string() +
                            " (run `radnas " + cmd + "` first)");
    }
    RunManifest up = manifest_from_json(util::read_file(mp));
    for (const auto& a : up.artifacts) {
      const fs::path p = abs(a.path);
      if (!fs::exists(p)) {
        throw MissingArtifact(command + ": missing upstream artifact " + p.string() +
                              " (run `radnas " + cmd + "` first)");
      }
      if (util::sha256_file(p) != a.sha256) {
        throw MissingArtifact(command + ": artifact " + p.string() +
                              " does not match the hash recorded by `" + cmd + "`");
      }
      manifest.inputs.push_back(a);
    }
    return up;
  }

  std::string data_stage() const {
    return config.dataset.source == "synth" ? "synth" : "preprocess";
  }
  fs::path split_manifest(const std::string& split) const {
    return root / layout::kData / split / "manifest.jsonl";
  }
  std::vector<io::Sample> load_split(const std::string& split) const {
    io::LoadOptions opts;
    opts.num_classes = config.model.num_classes;
    auto samples = io::load_dataset(split_manifest(split), opts);
    for (const auto& s : samples) {
      const Shape sh = s.pair.grayscale.shape();
      if (sh.h != config.model.input_h || sh.w != config.model.input_w) {
        throw std::runtime_error(s.sample_id + ": RD map is " + std::to_string(sh.h) + "x" +
                                 std::to_string(sh.w) + ", config expects " +
                                 std::to_string(config.model.input_h) + "x" +
                                 std::to_string(config.model.input_w));
      }
    }
    return samples;
  }
  void require_data() {
    std::vector<std::string> only;
    for (const auto& s : kSplits) only.push_back(std::string(layout::kData) + "/" + s + "/manifest.jsonl");
    require(data_stage(), only);
  }
  nas::SearchSpace space() const { return nas::space_by_name(config.search.space, config.model); }
};

void record_data_artifacts(Stage& st) {
  for (const auto& split : kSplits) {
    const fs::path mp = st.split_manifest(split);
    const auto m = io::read_manifest(mp, st.config.model.num_classes);
    const std::string dir = std::string(layout::kData) + "/" + split;
    st.produced(dir + "/manifest.jsonl");
    for (const auto& r : m.records) st.produced(dir + "/" + r.rd);
  }
}

void stage_synth(Stage& st) {
  if (st.config.dataset.source != "synth") {
    throw ConfigStageError("synth: dataset.source is '" + st.config.dataset.source +
                           "'; use `radnas preprocess` for recorded data");
  }
  const fs::path dir = st.root / layout::kData;
  if (fs::exists(dir)) fs::remove_all(dir);
  io::synth_generate(st.config.dataset.synth, st.config.seed, dir);
  record_data_artifacts(st);
  st.out << "synth: wrote " << st.config.dataset.synth.num_train << "/"
         << st.config.dataset.synth.num_val << "/" << st.config.dataset.synth.num_test
         << " samples to " << dir.string() << "\n";
}

void stage_preprocess(Stage& st) {
  if (st.config.dataset.source != "manifest") {
    throw ConfigStageError("preprocess: dataset.source is 'synth'; use `radnas synth`");
  }
  const fs::path dir = st.root / layout::kData;
  if (fs::exists(dir)) fs::remove_all(dir);
  std::size_t converted = 0, copied = 0;
  for (const auto& split : kSplits) {
    const fs::path src = fs::path(st.config.dataset.root) / split / "manifest.jsonl";
    const auto in = io::read_manifest(src, st.config.model.num_classes);
    io::DatasetManifest out;
    out.split = split;
    out.base_dir = dir / split;
    fs::create_directories(out.base_dir);
    for (const auto& rec : in.records) {
      io::RDMap rd;
      try {
        if (!rec.adc.empty()) {
          rd = io::adc_to_rd(io::read_adc(in.resolve(rec.adc)));
          ++converted;
        } else {
          rd = io::read_rdm(in.resolve(rec.rd));
          ++copied;
        }
      } catch (const std::exception& e) {
        throw io::RecordError(rec.sample_id, e.what());
      }
      io::ManifestRecord r;
      r.sample_id = rec.sample_id;
      r.rd = rec.sample_id + ".rdm";
      r.labels = rec.labels;
      io::write_rdm(out.base_dir / r.rd, rd);
      out.records.push_back(std::move(r));
    }
    io::write_manifest(out.base_dir / "manifest.jsonl", out);
  }
  record_data_artifacts(st);
  st.out << "preprocess: " << converted << " ADC cubes transformed, " << copied
         << " RD maps copied into " << dir.string() << "\n";
}

void stage_train_supernet(Stage& st) {
  st.require_data();
  const auto train = st.load_split("train");
  const auto space = st.space();
  auto supernet = detector::build_supernet(st.config.model, st.config.seed);
  st.out << "train-supernet: " << supernet.parameter_count() << " parameters, space '"
         << st.config.search.space << "' with " << space.cardinality() << " subnets\n";
  const auto t0 = std::chrono::steady_clock::now();
  const auto log = detector::train_supernet(supernet, space, train, st.config.supernet);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  st.out << "train-supernet: " << log.steps << " steps in " << csv_double(secs)
         << " s, loss " << csv_double(log.loss.front()) << " -> " << csv_double(log.loss.back())
         << "\n";

  fs::create_directories(st.abs(layout::kSupernet).parent_path());
  detector::CheckpointMeta meta;
  meta.config_hash = st.config.hash();
  meta.epoch = st.config.supernet.epochs;
  meta.seed = st.config.seed;
  detector::save_checkpoint(supernet, st.abs(layout::kSupernet), meta);
  std::string csv = "step,loss,gene_id\n";
  for (int i = 0; i < log.steps; ++i) {
    csv += std::to_string(i) + "," + csv_double(log.loss[i]) + "," + nas::gene_id(log.genes[i]) + "\n";
  }
  util::write_file_atomic(st.abs(layout::kSupernetLog), csv);
  st.produced(layout::kSupernet);
  st.produced(std::string(layout::kSupernet) + ".meta.json");
  st.produced(layout::kSupernetLog);
}

std::string top_gene_path(int rank) {
  return std::string(layout::kSearchTop) + "/gene_" + std::to_string(rank) + ".txt";
}

void stage_search(Stage& st) {
  st.require(
      "train-supernet",
      {layout::kSupernet, std::string(layout::kSupernet) + ".meta.json"});
  st.require_data();
  const auto train = st.load_split("train");
  const auto val = st.load_split("val");
  const auto space = st.space();
  auto supernet = detector::build_supernet(st.config.model, st.config.seed);
  detector::load_checkpoint(supernet, st.abs(layout::kSupernet));

  const auto recalib = detector::make_batches(train, st.config.search.recalib_batch_size,
                                              st.config.search.recalib_batches);
  if (st.config.search.recalib_batches == 0) {
    std::cerr << "warning: search.recalib_batches = 0, normalization statistics are "
                 "inherited without recalibration\n";
  }
  nas::FitnessOptions fopts;
  fopts.batch_size = st.config.eval.batch_size;
  fopts.decode = st.config.eval.decode;
  const auto& model_cfg = st.config.model;
  int evaluated = 0;
  auto fitness = [&](const nas::ArchitectureGene& g) {
    const double f = nas::evaluate_fitness(supernet, space, g, val,
                                           st.config.search.recalib_batches ? recalib
                                                                            : std::vector<detector::Batch>{},
                                           fopts);
    ++evaluated;
    return f;
  };
  auto cost = [&](const nas::ArchitectureGene& g) {
    return nas::Cost{nas::count_params(space, g, model_cfg),
                     nas::estimate_flops(space, g, model_cfg, model_cfg.input_h, model_cfg.input_w)};
  };
  const auto result = nas::evolve_search(space, st.config.search.config, fitness, cost);
  st.out << "search: " << evaluated << " distinct subnets evaluated, best mAP@50 "
         << csv_double(*result.ranked.front().fitness) << "\n";

  fs::create_directories(st.abs(layout::kSearchTop));
  nas::write_search_log(st.abs(layout::kSearchLog), result.log);
  std::string ranked = "rank,gene_id,fitness,params,flops,gene\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const auto& c = result.ranked[i];
    ranked += std::to_string(i + 1) + "," + nas::gene_id(c.gene) + "," + csv_double(*c.fitness) +
              "," + std::to_string(c.cost.params) + "," + std::to_string(c.cost.flops) + "," +
              nas::gene_to_string(space, c.gene) + "\n";
  }
  util::write_file_atomic(st.abs(layout::kSearchRanked), ranked);
  st.produced(layout::kSearchLog);
  st.produced(layout::kSearchRanked);
  const int top = std::min<int>(st.config.retrain.top, static_cast<int>(result.ranked.size()));
  for (int i = 0; i < top; ++i) {
    nas::write_gene_file(st.abs(top_gene_path(i + 1)), space, result.ranked[i].gene);
    st.produced(top_gene_path(i + 1));
  }
}

void stage_retrain(Stage& st) {
  const auto up = st.require("search");
  st.require_data();
  const auto train = st.load_split("train");
  const auto val = st.load_split("val");
  const auto space = st.space();
  std::vector<nas::ArchitectureGene> genes;
  for (int i = 1; i <= st.config.retrain.top; ++i) {
    const fs::path p = st.abs(top_gene_path(i));
    if (!fs::exists(p)) break;
    genes.push_back(nas::read_gene_file(p, space));
  }
  if (genes.empty()) {
    throw MissingArtifact("retrain-top: missing upstream artifact " +
                          st.abs(top_gene_path(1)).string() + " (run `radnas search` first)");
  }
  fs::create_directories(st.abs("retrain"));
  std::string summary = "rank,gene_id,params,flops,val_mAP@50\n";
  int best = -1;
  double best_map = -1;
  const auto& mc = st.config.model;
  for (std::size_t i = 0; i < genes.size(); ++i) {
    const auto arch = nas::to_architecture(space, genes[i], mc);
    auto model = detector::build_model(mc, arch, st.config.seed + 100 + i);
    auto hyper = st.config.retrain.hyper;
    hyper.seed = st.config.retrain.hyper.seed + i;
    detector::train_fixed(model, train, hyper);
    const double m50 = detector::evaluate(model, model.full_arch(), val, st.config.eval.batch_size,
                                          st.config.eval.decode)
                           .map50;
    st.out << "retrain-top: rank " << i + 1 << " gene " << nas::gene_id(genes[i])
           << " val mAP@50 " << csv_double(m50) << "\n";
    const std::string ck = "retrain/model_" + std::to_string(i + 1) + ".rnck";
    detector::CheckpointMeta meta{st.config.hash(), nas::format_gene(space, genes[i]),
                                  hyper.epochs, hyper.seed};
    detector::save_checkpoint(model, st.abs(ck), meta);
    st.produced(ck);
    st.produced(ck + ".meta.json");
    summary += std::to_string(i + 1) + "," + nas::gene_id(genes[i]) + "," +
               std::to_string(nas::count_params(mc, arch)) + "," +
               std::to_string(nas::estimate_flops(mc, arch, mc.input_h, mc.input_w)) + "," +
               csv_double(m50) + "\n";
    if (m50 > best_map) {
      best_map = m50;
      best = static_cast<int>(i);
    }
  }
  util::write_file_atomic(st.abs(layout::kRetrainSummary), summary);
  nas::write_gene_file(st.abs(layout::kBestGene), space, genes[best]);
  fs::copy_file(st.abs("retrain/model_" + std::to_string(best + 1) + ".rnck"),
                st.abs(layout::kBestModel), fs::copy_options::overwrite_existing);
  fs::copy_file(st.abs("retrain/model_" + std::to_string(best + 1) + ".rnck.meta.json"),
                st.abs(std::string(layout::kBestModel) + ".meta.json"),
                fs::copy_options::overwrite_existing);
  st.produced(layout::kRetrainSummary);
  st.produced(layout::kBestGene);
  st.produced(layout::kBestModel);
  st.produced(std::string(layout::kBestModel) + ".meta.json");
  st.out << "retrain-top: selected rank " << best + 1 << " (val mAP@50 " << csv_double(best_map)
         << ")\n";
  (void)up;
}

// Loads the selected model from the retrain stage.
detector::Model load_best(Stage& st, nas::ArchitectureGene& gene) {
  st.require("retrain-top", {layout::kBestGene, layout::kBestModel,
                             std::string(layout::kBestModel) + ".meta.json"});
  const auto space = st.space();
  gene = nas::read_gene_file(st.abs(layout::kBestGene), space);
  auto model = detector::build_model(st.config.model, space, gene, 0);
  detector::load_checkpoint(model, st.abs(layout::kBestModel));
  return model;
}

void stage_eval(Stage& st) {
  st.require_data();
  nas::ArchitectureGene gene;
  auto model = load_best(st, gene);
  const auto data = st.load_split(st.config.eval.split);
  const auto rep = detector::evaluate(model, model.full_arch(), data, st.config.eval.batch_size,
                                      st.config.eval.decode);
  const std::string rel = "eval/report_" + st.config.eval.split + ".csv";
  fs::create_directories(st.abs("eval"));
  eval::write_report_csv(st.abs(rel), st.config.eval.split, rep);
  st.produced(rel);
  st.out << "eval: " << st.config.eval.split << " mAP@30 " << csv_double(rep.map30)
         << " mAP@50 " << csv_double(rep.map50) << " mAP@50-95 " << csv_double(rep.map50_95)
         << "\n";
}

void stage_report(Stage& st) {
  st.require_data();
  st.require("eval");
  nas::ArchitectureGene gene;
  auto model = load_best(st, gene);
  const auto space = st.space();
  const auto& mc = st.config.model;
  const auto arch = model.full_arch();
  std::ostringstream csv;
  std::ostringstream text;
  bool header = true;
  text << "best gene: " << nas::gene_to_string(space, gene) << "\n"
       << "params: " << nas::count_params(st.config.model, nas::to_architecture(space, gene, mc))
       << "\nflops: "
       << nas::estimate_flops(mc, nas::to_architecture(space, gene, mc), mc.input_h, mc.input_w)
       << "\n";
  for (const std::string split : {"val", "test"}) {
    const auto rep = detector::evaluate(model, arch, st.load_split(split),
                                        st.config.eval.batch_size, st.config.eval.decode);
    eval::write_report_csv(csv, split, rep, header);
    header = false;
    text << split << ": mAP@30 " << csv_double(rep.map30) << ", mAP@50 " << csv_double(rep.map50)
         << ", mAP@70 " << csv_double(rep.map70) << ", mAP@50-95 " << csv_double(rep.map50_95)
         << "\n";
  }
  fs::create_directories(st.abs("report"));
  util::write_file_atomic(st.abs(layout::kReport), csv.str());
  util::write_file_atomic(st.abs(layout::kReportSummary), text.str());
  st.produced(layout::kReport);
  st.produced(layout::kReportSummary);
  st.out << text.str();
}

// True when a previous run of this command with the same config left intact
// artifacts.
bool up_to_date(Stage& st) {
  const fs::path mp = st.manifest_path(st.command);
  if (!fs::exists(mp)) return false;
  const RunManifest prev = manifest_from_json(util::read_file(mp));
  if (prev.config_hash != st.config.hash()) {
    throw ConfigStageError(st.command + ": existing outputs in " + st.root.string() +
                           " were produced by a different config; rerun with --force to "
                           "replace them");
  }
  for (const auto& a : prev.artifacts) {
    const fs::path p = st.abs(a.path);
    if (!fs::exists(p) || util::sha256_file(p) != a.sha256) return false;
  }
  st.out << st.command << ": up to date (" << mp.string() << ")\n";
  for (const auto& a : prev.artifacts) {
    if (a.path.find(".rdm") == std::string::npos) st.out << "  " << st.abs(a.path).string() << "\n";
  }
  return true;
}

}  // namespace

int run(const std::string& command, const fs::path& config_path, const RunOptions& options) {
  std::ostream& out = options.out ? *options.out : std::cout;
  std::ostream& err = options.err ? *options.err : std::cerr;
  const auto& cmds = commands();
  if (std::find(cmds.begin(), cmds.end(), command) == cmds.end()) {
    err << "unknown command '" << command << "'\n";
    return 2;
  }
  PipelineConfig config;
  try {
    config = load_config(config_path, options.overrides);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 2;
  }

  Stage st{command, config, output_root(config), out, {}};
  try {
    if (!options.force && up_to_date(st)) return 0;
    st.manifest.command = command;
    st.manifest.config_hash = config.hash();
    st.manifest.started_at = utc_now();
    fs::create_directories(st.root / layout::kRuns);
    // Outputs of this stage are replaced; drop the stale manifest first.
    fs::remove(st.manifest_path(command));

    if (command == "synth") stage_synth(st);
    else if (command == "preprocess") stage_preprocess(st);
    else if (command == "train-supernet") stage_train_supernet(st);
    else if (command == "search") stage_search(st);
    else if (command == "retrain-top") stage_retrain(st);
    else if (command == "eval") stage_eval(st);
    else stage_report(st);

    const std::string cfg_rel = std::string(layout::kRuns) + "/" + command + ".cfg";
    util::write_file_atomic(st.abs(cfg_rel), config.render());
    st.manifest.config_copy = cfg_rel;
    st.manifest.finished_at = utc_now();
    st.manifest.versions = {{"radnas", RADNAS_VERSION}, {"compiler", __VERSION__}};
    util::write_file_atomic(st.manifest_path(command), manifest_to_json(st.manifest));
    return 0;
  } catch (const MissingArtifact& e) {
    err << e.what() << "\n";
    return 3;
  } catch (const ConfigStageError& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace radnas::pipeline
