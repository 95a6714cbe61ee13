#include "radnas/detector/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "radnas/util/hash.hpp"

namespace radnas::detector {

namespace {

constexpr char kMagic[4] = {'R', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw std::runtime_error("checkpoint truncated");
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

// Named views of every tensor in visit order.
std::vector<std::pair<std::string, Tensor*>> collect(Model& model) {
  std::vector<std::pair<std::string, Tensor*>> out;
  model.visit({[&](Parameter& p) { out.emplace_back(p.name, &p.value); },
               [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); }});
  return out;
}

}  // namespace

std::filesystem::path checkpoint_meta_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".meta.json";
  return p;
}

void save_checkpoint(Model& model, const std::filesystem::path& path,
                     const CheckpointMeta& meta) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  const auto tensors = collect(model);
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const Shape s = t->shape();
    for (int d : {s.n, s.c, s.h, s.w}) put<std::int32_t>(out, d);
    out.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(double));
  }
  util::write_file_atomic(path, out);

  nlohmann::json j;
  j["config_hash"] = meta.config_hash;
  j["gene"] = meta.gene ? nlohmann::json(*meta.gene) : nlohmann::json(nullptr);
  j["epoch"] = meta.epoch;
  j["seed"] = meta.seed;
  j["sha256"] = util::sha256_hex(out);
  util::write_file_atomic(checkpoint_meta_path(path), j.dump(2) + "\n");
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(util::read_file(checkpoint_meta_path(path)));
  CheckpointMeta m;
  m.config_hash = j.at("config_hash").get<std::string>();
  if (!j.at("gene").is_null()) m.gene = j.at("gene").get<std::string>();
  m.epoch = j.at("epoch").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

CheckpointMeta load_checkpoint(Model& model, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("checkpoint not found: " + path.string());
  }
  const std::string data = util::read_file(path);
  Reader r(data);
  if (r.bytes(4) != std::string(kMagic, 4)) {
    throw std::runtime_error(path.string() + ": not a checkpoint");
  }
  if (r.get<std::uint32_t>() != kVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  }
  std::map<std::string, Tensor*> slots;
  for (auto& [name, t] : collect(model)) slots[name] = t;
  const auto count = r.get<std::uint64_t>();
  if (count != slots.size()) {
    throw std::runtime_error(path.string() + ": holds " + std::to_string(count) +
                             " tensors, model has " + std::to_string(slots.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.get<std::uint32_t>());
    Shape s;
    s.n = r.get<std::int32_t>();
    s.c = r.get<std::int32_t>();
    s.h = r.get<std::int32_t>();
    s.w = r.get<std::int32_t>();
    auto it = slots.find(name);
    if (it == slots.end()) throw std::runtime_error("checkpoint tensor " + name + " unknown");
    if (!(it->second->shape() == s)) {
      throw std::runtime_error("checkpoint tensor " + name + " has shape " + s.str() +
                               ", model expects " + it->second->shape().str());
    }
    const std::string raw = r.bytes(s.numel() * sizeof(double));
    std::memcpy(it->second->data(), raw.data(), raw.size());
  }
  if (!r.done()) throw std::runtime_error(path.string() + ": trailing bytes");
  return read_checkpoint_meta(path);
}

}  // namespace radnas::detector
