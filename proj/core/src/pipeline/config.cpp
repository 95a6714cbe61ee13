#include "radnas/pipeline/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "radnas/nas/search_space.hpp"
#include "radnas/util/hash.hpp"

namespace radnas::pipeline {

namespace pt = boost::property_tree;

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument([&] {
        std::string msg = "invalid config:";
        for (const auto& v : violations) msg += "\n  " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer");
  return v;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(trim(item))));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename C>
std::string fmt_list(const C& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

template <std::size_t N>
void assign_array(std::array<int, N>& dst, const std::string& text) {
  const auto v = parse_int_list(text);
  if (v.size() != N) {
    throw std::invalid_argument("expected " + std::to_string(N) + " comma-separated integers");
  }
  std::copy(v.begin(), v.end(), dst.begin());
}

struct Field {
  std::string key;  // dotted path
  std::function<void(const std::string&)> parse;
  std::function<std::string()> render;
};

void add_hyper_fields(std::vector<Field>& f, const std::string& sec, detector::TrainHyper& h) {
  f.push_back({sec + ".epochs", [&h](auto& s) { h.epochs = static_cast<int>(parse_int(s)); },
               [&h] { return std::to_string(h.epochs); }});
  f.push_back({sec + ".batch_size",
               [&h](auto& s) { h.batch_size = static_cast<int>(parse_int(s)); },
               [&h] { return std::to_string(h.batch_size); }});
  f.push_back({sec + ".lr", [&h](auto& s) { h.lr = parse_double(s); },
               [&h] { return fmt_double(h.lr); }});
  f.push_back({sec + ".final_lr_fraction",
               [&h](auto& s) { h.final_lr_fraction = parse_double(s); },
               [&h] { return fmt_double(h.final_lr_fraction); }});
  f.push_back({sec + ".momentum", [&h](auto& s) { h.momentum = parse_double(s); },
               [&h] { return fmt_double(h.momentum); }});
  f.push_back({sec + ".weight_decay", [&h](auto& s) { h.weight_decay = parse_double(s); },
               [&h] { return fmt_double(h.weight_decay); }});
  f.push_back({sec + ".grad_clip", [&h](auto& s) { h.grad_clip = parse_double(s); },
               [&h] { return fmt_double(h.grad_clip); }});
  f.push_back({sec + ".hflip", [&h](auto& s) { h.hflip = parse_bool(s); },
               [&h] { return std::string(h.hflip ? "true" : "false"); }});
  f.push_back({sec + ".max_steps",
               [&h](auto& s) { h.max_steps = static_cast<int>(parse_int(s)); },
               [&h] { return std::to_string(h.max_steps); }});
}

std::vector<Field> fields(PipelineConfig& c) {
  std::vector<Field> f;
  f.push_back({"seed", [&c](auto& s) { c.seed = static_cast<std::uint64_t>(parse_int(s)); },
               [&c] { return std::to_string(c.seed); }});
  f.push_back({"out_dir", [&c](auto& s) { c.out_dir = s; }, [&c] { return c.out_dir; }});

  auto& d = c.dataset;
  auto& sy = d.synth;
  f.push_back({"dataset.source", [&d](auto& s) { d.source = s; }, [&d] { return d.source; }});
  f.push_back({"dataset.root", [&d](auto& s) { d.root = s; }, [&d] { return d.root; }});
  auto int_field = [&f](const std::string& key, int& dst) {
    f.push_back({key, [&dst](auto& s) { dst = static_cast<int>(parse_int(s)); },
                 [&dst] { return std::to_string(dst); }});
  };
  auto double_field = [&f](const std::string& key, double& dst) {
    f.push_back({key, [&dst](auto& s) { dst = parse_double(s); },
                 [&dst] { return fmt_double(dst); }});
  };
  int_field("dataset.height", sy.height);
  int_field("dataset.width", sy.width);
  int_field("dataset.num_train", sy.num_train);
  int_field("dataset.num_val", sy.num_val);
  int_field("dataset.num_test", sy.num_test);
  int_field("dataset.num_classes", sy.num_classes);
  int_field("dataset.min_objects", sy.min_objects);
  int_field("dataset.max_objects", sy.max_objects);
  double_field("dataset.snr_min_db", sy.snr_min_db);
  double_field("dataset.snr_max_db", sy.snr_max_db);

  auto& m = c.model;
  f.push_back({"model.backbone_widths", [&m](auto& s) { assign_array(m.backbone_widths, s); },
               [&m] { return fmt_list(m.backbone_widths); }});
  f.push_back({"model.stem_widths", [&m](auto& s) { assign_array(m.stem_widths, s); },
               [&m] { return fmt_list(m.stem_widths); }});
  f.push_back({"model.neck_widths", [&m](auto& s) { assign_array(m.neck_widths, s); },
               [&m] { return fmt_list(m.neck_widths); }});
  int_field("model.bottlenecks", m.bottlenecks);
  f.push_back({"model.variant", [&m](auto& s) { m.variant = detector::variant_from_string(s); },
               [&m] { return detector::to_string(m.variant); }});
  f.push_back({"model.backbone_input",
               [&m](auto& s) { m.backbone_input = detector::representation_from_string(s); },
               [&m] { return detector::to_string(m.backbone_input); }});
  f.push_back({"model.adapter_input",
               [&m](auto& s) { m.adapter_input = detector::representation_from_string(s); },
               [&m] { return detector::to_string(m.adapter_input); }});
  f.push_back({"model.exchanger_modes", [&m](auto& s) { m.exchanger_modes = parse_int_list(s); },
               [&m] { return fmt_list(m.exchanger_modes); }});

  add_hyper_fields(f, "supernet", c.supernet);

  auto& se = c.search;
  auto& sc = se.config;
  f.push_back({"search.space", [&se](auto& s) { se.space = s; }, [&se] { return se.space; }});
  int_field("search.population", sc.population);
  int_field("search.iterations", sc.iterations);
  int_field("search.top_k", sc.top_k);
  double_field("search.mutation_prob", sc.mutation_prob);
  auto opt_field = [&f](const std::string& key, std::optional<std::int64_t>& dst) {
    f.push_back({key,
                 [&dst](auto& s) {
                   if (s.empty() || s == "none") {
                     dst.reset();
                   } else {
                     dst = parse_int(s);
                   }
                 },
                 [&dst] { return dst ? std::to_string(*dst) : std::string("none"); }});
  };
  opt_field("search.max_params", sc.max_params);
  opt_field("search.max_flops", sc.max_flops);
  int_field("search.recalib_batches", se.recalib_batches);
  int_field("search.recalib_batch_size", se.recalib_batch_size);

  int_field("retrain.top", c.retrain.top);
  add_hyper_fields(f, "retrain", c.retrain.hyper);

  auto& ev = c.eval;
  f.push_back({"eval.split", [&ev](auto& s) { ev.split = s; }, [&ev] { return ev.split; }});
  int_field("eval.batch_size", ev.batch_size);
  double_field("eval.score_threshold", ev.decode.score_threshold);
  double_field("eval.nms_iou", ev.decode.nms_iou);
  int_field("eval.max_detections", ev.decode.max_detections);
  return f;
}

void collect_keys(const pt::ptree& tree, const std::string& prefix,
                  std::vector<std::string>& out) {
  for (const auto& [k, v] : tree) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.empty()) {
      out.push_back(key);
    } else {
      collect_keys(v, key, out);
    }
  }
}

void check_hyper(std::vector<std::string>& v, const std::string& sec,
                 const detector::TrainHyper& h) {
  if (h.epochs < 1) v.push_back(sec + ".epochs must be >= 1");
  if (h.batch_size < 1) v.push_back(sec + ".batch_size must be >= 1");
  if (!(h.lr > 0)) v.push_back(sec + ".lr must be > 0");
  if (!(h.final_lr_fraction >= 0 && h.final_lr_fraction <= 1)) {
    v.push_back(sec + ".final_lr_fraction must lie in [0,1]");
  }
  if (!(h.momentum >= 0 && h.momentum < 1)) v.push_back(sec + ".momentum must lie in [0,1)");
  if (!(h.weight_decay >= 0)) v.push_back(sec + ".weight_decay must be >= 0");
  if (h.max_steps < 0) v.push_back(sec + ".max_steps must be >= 0");
}

std::vector<std::string> semantic_violations(const PipelineConfig& c) {
  std::vector<std::string> v;
  const auto& sy = c.dataset.synth;
  if (c.dataset.source != "synth" && c.dataset.source != "manifest") {
    v.push_back("dataset.source must be synth or manifest, got '" + c.dataset.source + "'");
  }
  if (c.dataset.source == "manifest") {
    if (c.dataset.root.empty()) {
      v.push_back("dataset.root is required when dataset.source = manifest");
    } else {
      for (const char* split : {"train", "val", "test"}) {
        const auto p = std::filesystem::path(c.dataset.root) / split / "manifest.jsonl";
        if (!std::filesystem::exists(p)) v.push_back("dataset.root: missing " + p.string());
      }
    }
  }
  if (sy.height <= 0 || sy.height % 32 != 0) {
    v.push_back("dataset.height (" + std::to_string(sy.height) +
                ") must be a positive multiple of 32");
  }
  if (sy.width <= 0 || sy.width % 32 != 0) {
    v.push_back("dataset.width (" + std::to_string(sy.width) +
                ") must be a positive multiple of 32");
  }
  try {
    sy.validate();
  } catch (const std::exception& e) {
    v.push_back(std::string("dataset: ") + e.what());
  }
  bool model_ok = true;
  try {
    c.model.validate();
  } catch (const std::exception& e) {
    model_ok = false;
    v.push_back(e.what());
  }
  check_hyper(v, "supernet", c.supernet);
  check_hyper(v, "retrain", c.retrain.hyper);

  const auto& sc = c.search.config;
  if (sc.population < 1) v.push_back("search.population must be >= 1");
  if (sc.iterations < 1) v.push_back("search.iterations must be >= 1");
  if (sc.top_k < 1) v.push_back("search.top_k must be >= 1");
  if (sc.top_k > sc.population) {
    v.push_back("search.top_k (" + std::to_string(sc.top_k) + ") must not exceed search.population (" +
                std::to_string(sc.population) + ")");
  }
  if (!(sc.mutation_prob >= 0 && sc.mutation_prob <= 1)) {
    v.push_back("search.mutation_prob must lie in [0,1]");
  }
  if (sc.max_params && *sc.max_params < 1) v.push_back("search.max_params must be positive");
  if (sc.max_flops && *sc.max_flops < 1) v.push_back("search.max_flops must be positive");
  if (c.search.recalib_batches < 0) v.push_back("search.recalib_batches must be >= 0");
  if (c.search.recalib_batch_size < 1) v.push_back("search.recalib_batch_size must be >= 1");
  if (model_ok) {
    try {
      const auto space = nas::space_by_name(c.search.space, c.model);
      space.validate();
      nas::to_architecture(space, nas::full_width_gene(space), c.model);
      if (space.cardinality() < static_cast<std::uint64_t>(sc.population)) {
        v.push_back("search.population (" + std::to_string(sc.population) +
                    ") exceeds the size of search space '" + c.search.space + "' (" +
                    std::to_string(space.cardinality()) + ")");
      }
    } catch (const std::exception& e) {
      v.push_back(std::string("search.space: ") + e.what());
    }
  }
  if (c.retrain.top < 1) v.push_back("retrain.top must be >= 1");
  if (c.retrain.top > sc.population) {
    v.push_back("retrain.top (" + std::to_string(c.retrain.top) +
                ") must not exceed search.population (" + std::to_string(sc.population) + ")");
  }
  if (c.eval.split != "train" && c.eval.split != "val" && c.eval.split != "test") {
    v.push_back("eval.split must be train, val or test");
  }
  if (c.eval.batch_size < 1) v.push_back("eval.batch_size must be >= 1");
  if (!(c.eval.decode.score_threshold >= 0 && c.eval.decode.score_threshold <= 1)) {
    v.push_back("eval.score_threshold must lie in [0,1]");
  }
  if (!(c.eval.decode.nms_iou >= 0 && c.eval.decode.nms_iou <= 1)) {
    v.push_back("eval.nms_iou must lie in [0,1]");
  }
  if (c.eval.decode.max_detections < 1) v.push_back("eval.max_detections must be >= 1");
  return v;
}

PipelineConfig parse_tree(pt::ptree tree, const std::vector<std::string>& overrides) {
  std::vector<std::string> v;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      v.push_back("override '" + o + "' is not key=value");
      continue;
    }
    tree.put(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  if (!tree.get_child_optional("seed")) v.push_back("seed is required");

  PipelineConfig c;
  auto table = fields(c);
  std::set<std::string> known;
  for (const auto& f : table) known.insert(f.key);
  std::vector<std::string> keys;
  collect_keys(tree, "", keys);
  for (const auto& k : keys) {
    if (!known.count(k)) v.push_back("unknown key '" + k + "'");
  }
  for (const auto& f : table) {
    auto node = tree.get_optional<std::string>(f.key);
    if (!node) continue;
    try {
      f.parse(trim(*node));
    } catch (const std::exception& e) {
      v.push_back(f.key + " = '" + *node + "': " + e.what());
    }
  }
  c.model.num_classes = c.dataset.synth.num_classes;
  c.model.input_h = c.dataset.synth.height;
  c.model.input_w = c.dataset.synth.width;
  c.search.config.seed = c.seed + 1;
  c.supernet.seed = c.seed;
  c.retrain.hyper.seed = c.seed + 2;
  if (v.empty()) v = semantic_violations(c);
  if (!v.empty()) throw ConfigError(std::move(v));
  return c;
}

}  // namespace

std::string PipelineConfig::render() const {
  auto& self = const_cast<PipelineConfig&>(*this);
  std::string out;
  std::string section;
  for (const auto& f : fields(self)) {
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += name + " = " + f.render() + "\n";
  }
  return out;
}

std::string PipelineConfig::hash() const {
  PipelineConfig copy = *this;
  copy.out_dir.clear();
  return util::sha256_hex(copy.render());
}

PipelineConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({std::string("syntax: ") + e.what()});
  }
  return parse_tree(std::move(tree), overrides);
}

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::vector<std::string> validate_config(const std::filesystem::path& path,
                                         const std::vector<std::string>& overrides) {
  try {
    load_config(path, overrides);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

}  // namespace radnas::pipeline
