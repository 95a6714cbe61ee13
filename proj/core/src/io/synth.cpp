#include "radnas/io/synth.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <random>

namespace radnas::io {

namespace {

struct BlobFamily {
  double range_sigma_lo, range_sigma_hi;
  double doppler_sigma_lo, doppler_sigma_hi;
};

// Spreads in bins. 0: Doppler-extended, 1: range-extended, 2: broad, 3: compact.
constexpr BlobFamily kFamilies[kMaxSynthClasses] = {
    {1.0, 1.6, 2.6, 4.0},
    {2.6, 4.0, 1.0, 1.6},
    {2.4, 3.4, 2.4, 3.4},
    {1.0, 1.5, 1.0, 1.5},
};

std::uint64_t split_tag(const std::string& split) {
  if (split == "train") return 1;
  if (split == "val") return 2;
  if (split == "test") return 3;
  return 4;
}

double box_iou(const Annotation& a, const Annotation& b) {
  const double ix = std::max(0.0, std::min(a.cx + a.w / 2, b.cx + b.w / 2) -
                                      std::max(a.cx - a.w / 2, b.cx - b.w / 2));
  const double iy = std::max(0.0, std::min(a.cy + a.h / 2, b.cy + b.h / 2) -
                                      std::max(a.cy - a.h / 2, b.cy - b.h / 2));
  const double inter = ix * iy;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("synth config: " + what);
  };
  if (height < 8 || width < 8) fail("height/width must be >= 8");
  if (num_train <= 0) fail("num_train must be > 0");
  if (num_val < 0 || num_test < 0) fail("num_val/num_test must be >= 0");
  if (num_classes < 1 || num_classes > kMaxSynthClasses) {
    fail("num_classes must be in [1," + std::to_string(kMaxSynthClasses) + "]");
  }
  if (min_objects < 0 || max_objects < min_objects || max_objects == 0) {
    fail("need 0 <= min_objects <= max_objects, max_objects > 0");
  }
  if (!(snr_max_db >= snr_min_db)) fail("snr_max_db < snr_min_db");
  if (!(contour_fraction > 0 && contour_fraction < 1)) {
    fail("contour_fraction must be in (0,1)");
  }
}

SynthScene synth_scene(const SynthConfig& config, std::uint64_t seed,
                       const std::string& split, int index) {
  std::seed_seq seq{seed, split_tag(split), static_cast<std::uint64_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, std::sqrt(0.5));
  std::uniform_int_distribution<int> count_dist(config.min_objects,
                                                config.max_objects);
  std::uniform_int_distribution<int> class_dist(0, config.num_classes - 1);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int H = config.height;
  const int W = config.width;
  const double contour = std::sqrt(-2.0 * std::log(config.contour_fraction));

  struct Blob {
    double r0, d0, sr, sd, amp;
  };
  std::vector<Blob> blobs;
  SynthScene scene;
  const int wanted = count_dist(rng);
  for (int k = 0; k < wanted; ++k) {
    const int cls = class_dist(rng);
    const BlobFamily& f = kFamilies[cls];
    const double sr = uniform(f.range_sigma_lo, f.range_sigma_hi);
    const double sd = uniform(f.doppler_sigma_lo, f.doppler_sigma_hi);
    const double amp = std::pow(10.0, uniform(config.snr_min_db, config.snr_max_db) / 20.0);
    const double half_r = contour * sr;
    const double half_d = contour * sd;
    if (2 * half_r >= H || 2 * half_d >= W) continue;
    // Place without overlap; give up on this object after a few tries.
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double r0 = uniform(half_r, H - half_r);
      const double d0 = uniform(half_d, W - half_d);
      Annotation a;
      a.class_id = cls;
      a.cx = d0 / W;
      a.cy = r0 / H;
      a.w = 2 * half_d / W;
      a.h = 2 * half_r / H;
      bool clear = true;
      for (const auto& other : scene.labels) {
        if (box_iou(a, other) > 0.0) clear = false;
      }
      if (!clear) continue;
      scene.labels.push_back(a);
      blobs.push_back({r0, d0, sr, sd, amp});
      break;
    }
  }

  scene.rd.range_bins = H;
  scene.rd.doppler_bins = W;
  scene.rd.intensity.resize(static_cast<std::size_t>(H) * W);
  for (int r = 0; r < H; ++r) {
    for (int d = 0; d < W; ++d) {
      // Pixel centers at (r + 0.5, d + 0.5) so boxes align with cell edges.
      double signal = 0.0;
      for (const auto& b : blobs) {
        const double dr = (r + 0.5 - b.r0) / b.sr;
        const double dd = (d + 0.5 - b.d0) / b.sd;
        signal += b.amp * std::exp(-0.5 * (dr * dr + dd * dd));
      }
      const std::complex<double> z(signal + noise(rng), noise(rng));
      scene.rd.at(r, d) = static_cast<float>(20.0 * std::log10(std::abs(z) + kDbFloor));
    }
  }
  return scene;
}

SynthResult synth_generate(const SynthConfig& config, std::uint64_t seed,
                           const std::filesystem::path& out_dir) {
  config.validate();
  SynthResult result;
  const std::pair<const char*, int> splits[] = {
      {"train", config.num_train}, {"val", config.num_val}, {"test", config.num_test}};
  for (const auto& [split, count] : splits) {
    const auto dir = out_dir / split;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
      throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    }
    DatasetManifest manifest;
    manifest.split = split;
    manifest.base_dir = dir;
    for (int i = 0; i < count; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%05d", split, i);
      SynthScene scene = synth_scene(config, seed, split, i);
      const std::string file = std::string(name) + ".rdm";
      write_rdm(dir / file, scene.rd);
      manifest.records.push_back({name, file, "", std::move(scene.labels)});
    }
    const auto path = dir / "manifest.jsonl";
    write_manifest(path, manifest);
    result.manifests[split] = path;
  }
  return result;
}

}  // namespace radnas::io
