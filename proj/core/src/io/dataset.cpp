#include "radnas/io/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

namespace radnas::io {

using nlohmann::json;

void Annotation::validate(int num_classes) const {
  if (class_id < 0 || class_id >= num_classes) {
    throw std::invalid_argument("class " + std::to_string(class_id) +
                                " outside [0," + std::to_string(num_classes) +
                                ")");
  }
  if (!(w > 0) || !(h > 0)) {
    throw std::invalid_argument("box has non-positive size");
  }
  constexpr double kSlack = 1e-9;
  if (cx - w / 2 < -kSlack || cx + w / 2 > 1 + kSlack || cy - h / 2 < -kSlack ||
      cy + h / 2 > 1 + kSlack) {
    throw std::invalid_argument("box extends outside [0,1]^2");
  }
}

std::string infer_split(const std::filesystem::path& manifest_path) {
  const std::string dir = manifest_path.parent_path().filename().string();
  for (const char* s : {"train", "val", "test"}) {
    if (dir == s) return s;
  }
  return "train";
}

DatasetManifest read_manifest(const std::filesystem::path& path,
                              int num_classes) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.split = infer_split(path);
  manifest.base_dir = path.parent_path();
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord rec;
    try {
      const json j = json::parse(line);
      rec.sample_id = j.at("sample_id").get<std::string>();
      rec.rd = j.value("rd", std::string{});
      rec.adc = j.value("adc", std::string{});
      if (rec.rd.empty() && rec.adc.empty()) {
        throw std::invalid_argument("record has neither rd nor adc path");
      }
      for (const auto& l : j.at("labels")) {
        Annotation a;
        a.class_id = l.at("cls").get<int>();
        a.cx = l.at("cx").get<double>();
        a.cy = l.at("cy").get<double>();
        a.w = l.at("w").get<double>();
        a.h = l.at("h").get<double>();
        a.validate(num_classes);
        rec.labels.push_back(a);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed record" +
                               (rec.sample_id.empty() ? "" : " " + rec.sample_id) +
                               ": " + e.what());
    }
    if (!seen.insert(rec.sample_id).second) {
      throw std::runtime_error(path.string() + ": duplicate sample_id " +
                               rec.sample_id);
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& rec : manifest.records) {
    json j;
    j["sample_id"] = rec.sample_id;
    if (!rec.rd.empty()) j["rd"] = rec.rd;
    if (!rec.adc.empty()) j["adc"] = rec.adc;
    json labels = json::array();
    for (const auto& a : rec.labels) {
      labels.push_back(
          {{"cls", a.class_id}, {"cx", a.cx}, {"cy", a.cy}, {"w", a.w}, {"h", a.h}});
    }
    j["labels"] = std::move(labels);
    os << j.dump() << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

DatasetReader::DatasetReader(const std::filesystem::path& manifest_path,
                             LoadOptions options)
    : manifest_(read_manifest(manifest_path, options.num_classes)) {
  order_.resize(manifest_.records.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (options.shuffle) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

std::optional<Sample> DatasetReader::next() {
  if (pos_ >= order_.size()) return std::nullopt;
  const ManifestRecord& rec = manifest_.records[order_[pos_++]];
  if (rec.rd.empty()) {
    throw RecordError(rec.sample_id, "no rd file (run preprocess first)");
  }
  const auto path = manifest_.resolve(rec.rd);
  if (!std::filesystem::exists(path)) {
    throw RecordError(rec.sample_id, "missing RD file " + path.string());
  }
  RDMap rd;
  try {
    rd = read_rdm(path);
  } catch (const std::exception& e) {
    throw RecordError(rec.sample_id, e.what());
  }
  Sample s;
  s.sample_id = rec.sample_id;
  s.pair = make_representations(rd);
  s.labels = rec.labels;
  return s;
}

std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path,
                                 const LoadOptions& options) {
  DatasetReader reader(manifest_path, options);
  std::vector<Sample> out;
  out.reserve(reader.size());
  while (auto s = reader.next()) out.push_back(std::move(*s));
  return out;
}

}  // namespace radnas::io
