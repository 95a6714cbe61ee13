#include "radnas/io/rdmap.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace radnas::io {

namespace {

// FFTW planners are not reentrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

float get_f32(const unsigned char* b) { return std::bit_cast<float>(get_u32(b)); }

struct Header {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::vector<unsigned char> payload;
};

Header read_file(const std::filesystem::path& path, const char magic[4],
                 std::size_t bytes_per_cell) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), magic, 4) != 0) {
    throw std::runtime_error(path.string() + ": bad magic, expected " +
                             std::string(magic, 4));
  }
  Header h;
  h.a = get_u32(buf.data() + 4);
  h.b = get_u32(buf.data() + 8);
  if (get_u32(buf.data() + 12) != 0) {
    throw std::runtime_error(path.string() + ": reserved header field not 0");
  }
  if (h.a == 0 || h.b == 0) {
    throw std::runtime_error(path.string() + ": zero dimension");
  }
  const std::size_t expected =
      16 + static_cast<std::size_t>(h.a) * h.b * bytes_per_cell;
  if (buf.size() != expected) {
    throw std::runtime_error(path.string() + ": size " +
                             std::to_string(buf.size()) + ", expected " +
                             std::to_string(expected));
  }
  h.payload.assign(buf.begin() + 16, buf.end());
  return h;
}

void normalize(const RDMap& rd, std::vector<double>& out) {
  rd.validate();
  const auto [lo, hi] =
      std::minmax_element(rd.intensity.begin(), rd.intensity.end());
  const double min = *lo;
  const double range = static_cast<double>(*hi) - min;
  out.resize(rd.intensity.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = range > 0 ? (rd.intensity[i] - min) / range : 0.0;
  }
}

}  // namespace

void RDMap::validate() const {
  if (range_bins <= 0 || doppler_bins <= 0) {
    throw std::invalid_argument("RDMap: non-positive bins");
  }
  if (intensity.size() != static_cast<std::size_t>(range_bins) * doppler_bins) {
    throw std::invalid_argument("RDMap: intensity size does not match bins");
  }
  for (float v : intensity) {
    if (!std::isfinite(v)) throw std::invalid_argument("RDMap: non-finite cell");
  }
}

RDMap adc_to_rd(const RawADCCube& cube) {
  if (cube.chirps < 2 || cube.samples < 2) {
    throw std::invalid_argument("adc_to_rd: cube must be at least 2x2, got " +
                                std::to_string(cube.chirps) + "x" +
                                std::to_string(cube.samples));
  }
  const std::size_t cells = static_cast<std::size_t>(cube.chirps) * cube.samples;
  if (cube.data.size() != cells) {
    throw std::invalid_argument("adc_to_rd: data size does not match shape");
  }
  for (std::size_t i = 0; i < cells; ++i) {
    if (!std::isfinite(cube.data[i].real()) ||
        !std::isfinite(cube.data[i].imag())) {
      throw std::invalid_argument(
          "adc_to_rd: non-finite sample at chirp " +
          std::to_string(i / cube.samples) + ", sample " +
          std::to_string(i % cube.samples));
    }
  }

  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * cells));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(cube.chirps, cube.samples, buf, buf, FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < cells; ++i) {
    buf[i][0] = cube.data[i].real();
    buf[i][1] = cube.data[i].imag();
  }
  fftw_execute(plan);

  RDMap rd;
  rd.range_bins = cube.samples;
  rd.doppler_bins = cube.chirps;
  rd.intensity.resize(cells);
  const int half = cube.chirps / 2;
  for (int d = 0; d < cube.chirps; ++d) {
    const int shifted = (d + half) % cube.chirps;
    for (int r = 0; r < cube.samples; ++r) {
      const auto& z = buf[static_cast<std::size_t>(d) * cube.samples + r];
      const double mag = std::hypot(z[0], z[1]);
      rd.at(r, shifted) = static_cast<float>(20.0 * std::log10(mag + kDbFloor));
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return rd;
}

Tensor to_grayscale(const RDMap& rd) {
  std::vector<double> norm;
  normalize(rd, norm);
  return Tensor(Shape{1, 1, rd.range_bins, rd.doppler_bins}, std::move(norm));
}

std::array<double, 3> colormap(double v) {
  static constexpr std::array<double, 6> kAnchors = {0.0,   0.125, 0.375,
                                                     0.625, 0.875, 1.0};
  static constexpr std::array<std::array<double, 3>, 6> kColors = {{
      {0.0, 0.0, 0.5},
      {0.0, 0.0, 1.0},
      {0.0, 1.0, 1.0},
      {1.0, 1.0, 0.0},
      {1.0, 0.0, 0.0},
      {0.5, 0.0, 0.0},
  }};
  v = std::clamp(v, 0.0, 1.0);
  std::size_t seg = 0;
  while (seg + 2 < kAnchors.size() && v > kAnchors[seg + 1]) ++seg;
  const double t = (v - kAnchors[seg]) / (kAnchors[seg + 1] - kAnchors[seg]);
  std::array<double, 3> rgb{};
  for (int ch = 0; ch < 3; ++ch) {
    rgb[ch] = kColors[seg][ch] + t * (kColors[seg + 1][ch] - kColors[seg][ch]);
  }
  return rgb;
}

Tensor to_heatmap(const RDMap& rd) {
  std::vector<double> norm;
  normalize(rd, norm);
  Tensor out(Shape{1, 3, rd.range_bins, rd.doppler_bins});
  const std::size_t plane = norm.size();
  for (std::size_t i = 0; i < plane; ++i) {
    const auto rgb = colormap(norm[i]);
    for (int ch = 0; ch < 3; ++ch) out[ch * plane + i] = rgb[ch];
  }
  return out;
}

RepresentationPair make_representations(const RDMap& rd) {
  return {to_heatmap(rd), to_grayscale(rd)};
}

void write_rdm(const std::filesystem::path& path, const RDMap& rd) {
  rd.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("RDM1", 4);
  put_u32(os, static_cast<std::uint32_t>(rd.range_bins));
  put_u32(os, static_cast<std::uint32_t>(rd.doppler_bins));
  put_u32(os, 0);
  for (float v : rd.intensity) put_f32(os, v);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

RDMap read_rdm(const std::filesystem::path& path) {
  const Header h = read_file(path, "RDM1", 4);
  RDMap rd;
  rd.range_bins = static_cast<int>(h.a);
  rd.doppler_bins = static_cast<int>(h.b);
  rd.intensity.resize(static_cast<std::size_t>(h.a) * h.b);
  for (std::size_t i = 0; i < rd.intensity.size(); ++i) {
    rd.intensity[i] = get_f32(h.payload.data() + 4 * i);
  }
  return rd;
}

void write_adc(const std::filesystem::path& path, const RawADCCube& cube) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("ADC1", 4);
  put_u32(os, static_cast<std::uint32_t>(cube.chirps));
  put_u32(os, static_cast<std::uint32_t>(cube.samples));
  put_u32(os, 0);
  for (const auto& z : cube.data) {
    put_f32(os, static_cast<float>(z.real()));
    put_f32(os, static_cast<float>(z.imag()));
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

RawADCCube read_adc(const std::filesystem::path& path) {
  const Header h = read_file(path, "ADC1", 8);
  RawADCCube cube;
  cube.chirps = static_cast<int>(h.a);
  cube.samples = static_cast<int>(h.b);
  cube.data.resize(static_cast<std::size_t>(h.a) * h.b);
  for (std::size_t i = 0; i < cube.data.size(); ++i) {
    cube.data[i] = {get_f32(h.payload.data() + 8 * i),
                    get_f32(h.payload.data() + 8 * i + 4)};
  }
  return cube;
}

}  // namespace radnas::io
