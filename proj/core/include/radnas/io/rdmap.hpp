#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <vector>

#include "radnas/tensor.hpp"

namespace radnas::io {

// One radar frame of complex ADC samples, row-major [chirps x samples].
struct RawADCCube {
  int chirps = 0;   // slow time
  int samples = 0;  // fast time
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int chirp, int sample) {
    return data[static_cast<std::size_t>(chirp) * samples + sample];
  }
  std::complex<double> at(int chirp, int sample) const {
    return data[static_cast<std::size_t>(chirp) * samples + sample];
  }
};

// Range x Doppler intensity in dB, row-major. Stored in single precision to
// match the on-disk format bit for bit.
struct RDMap {
  int range_bins = 0;
  int doppler_bins = 0;
  std::vector<float> intensity;

  float& at(int r, int d) {
    return intensity[static_cast<std::size_t>(r) * doppler_bins + d];
  }
  float at(int r, int d) const {
    return intensity[static_cast<std::size_t>(r) * doppler_bins + d];
  }
  void validate() const;
};

struct RepresentationPair {
  Tensor heatmap;    // {1,3,H,W}, values in [0,1]
  Tensor grayscale;  // {1,1,H,W}, values in [0,1]
};

inline constexpr double kDbFloor = 1e-12;

// Range FFT over fast time, Doppler FFT over chirps with the zero-Doppler bin
// shifted to index chirps/2, then 20*log10(|X| + 1e-12).
RDMap adc_to_rd(const RawADCCube& cube);

// (v - min) / (max - min); a constant map yields zeros.
Tensor to_grayscale(const RDMap& rd);

// RGB for a normalized value through the fixed piecewise-linear colormap.
std::array<double, 3> colormap(double normalized);
Tensor to_heatmap(const RDMap& rd);

RepresentationPair make_representations(const RDMap& rd);

// .rdm: "RDM1", height u32 LE, width u32 LE, reserved u32 = 0, then
// height*width float32 LE row-major.
void write_rdm(const std::filesystem::path& path, const RDMap& rd);
RDMap read_rdm(const std::filesystem::path& path);

// .adc: "ADC1", chirps u32 LE, samples u32 LE, reserved u32 = 0, then
// chirps*samples (re, im) float32 LE pairs, chirp-major.
void write_adc(const std::filesystem::path& path, const RawADCCube& cube);
RawADCCube read_adc(const std::filesystem::path& path);

}  // namespace radnas::io
