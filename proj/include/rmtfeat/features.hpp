#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmtfeat/ingest.hpp"

namespace rmtfeat {

// Per-channel window statistics, in output order within each channel block.
enum class StatFeature : std::size_t {
  HarmonicMean,
  StdDev,
  MeanDeviation,
  Kurtosis,
  Rms,
  Peak,
  Range,
};
inline constexpr std::size_t kStatFeatureCount = 7;
std::string_view stat_feature_name(StatFeature f);

// Length 7N, channel-major: values[7 * ch + feature]. Entries that are
// undefined for the window (harmonic mean across zeros or a sign change,
// kurtosis of a constant channel) are NaN with defined[i] = false.
struct StatFeatureVector {
  std::vector<double> values;
  std::vector<bool> defined;
  std::size_t window_index{0};
  std::string subject_id;
  std::optional<std::string> label;
};

// Statistics of one channel's samples.
std::array<double, kStatFeatureCount> channel_stats(std::span<const double> d);

StatFeatureVector stat_features(const WindowMatrix& w);

using Complex = std::complex<double>;

// X(k) = sum_n x(n) W^{kn}, W = exp(-2 pi j / N). Power-of-two lengths take a
// radix-2 path; other lengths go through Bluestein's chirp-z on top of it.
std::vector<Complex> dft(std::span<const Complex> x);
// x(n) = (1/N) sum_k X(k) W^{-kn}
std::vector<Complex> idft(std::span<const Complex> x);

// O(N^2) evaluation straight from the definition; the reference for dft().
std::vector<Complex> dft_direct(std::span<const Complex> x, bool inverse = false);
// Radix-2 Cooley-Tukey; the length must be a power of two.
std::vector<Complex> fft_radix2(std::span<const Complex> x, bool inverse = false);

// Zeroes every DFT bin whose frequency lies outside [lo_hz, hi_hz], mirrored
// bins included, and transforms back per channel.
Recording bandpass_mask(const Recording& rec, double lo_hz, double hi_hz);

}  // namespace rmtfeat
