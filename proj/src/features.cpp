#include "rmtfeat/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"

namespace rmtfeat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

// exp(sign * 2 pi j * k / n) with k reduced mod n first, so large k*n
// products do not lose accuracy.
Complex twiddle(std::size_t k, std::size_t n, double sign) {
  const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k % n) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

std::vector<Complex> bluestein(std::span<const Complex> x, bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  // chirp[k] = exp(sign * pi j k^2 / n); k^2 taken mod 2n to keep the angle small.
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);
    const double angle = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = {std::cos(angle), std::sin(angle)};
  }
  std::vector<Complex> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = std::conj(chirp[k]);
    b[m - k] = std::conj(chirp[k]);
  }
  auto fa = fft_radix2(a);
  const auto fb = fft_radix2(b);
  for (std::size_t i = 0; i < m; ++i) fa[i] *= fb[i];
  const auto conv = fft_radix2(fa, true);
  std::vector<Complex> out(n);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = conv[k] * chirp[k] * inv_m;
  return out;
}

std::vector<Complex> transform(std::span<const Complex> x, bool inverse) {
  if (x.empty()) throw Error("DFT of an empty sequence");
  std::vector<Complex> out;
  if (is_pow2(x.size())) {
    out = fft_radix2(x, inverse);
  } else {
    out = bluestein(x, inverse);
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(x.size());
    for (auto& v : out) v *= scale;
  }
  return out;
}

}  // namespace

std::string_view stat_feature_name(StatFeature f) {
  switch (f) {
    case StatFeature::HarmonicMean: return "hmean";
    case StatFeature::StdDev: return "std";
    case StatFeature::MeanDeviation: return "meandev";
    case StatFeature::Kurtosis: return "kurtosis";
    case StatFeature::Rms: return "rms";
    case StatFeature::Peak: return "peak";
    case StatFeature::Range: return "range";
  }
  return "?";
}

std::array<double, kStatFeatureCount> channel_stats(std::span<const double> d) {
  if (d.empty()) throw Error("statistics of an empty channel");
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double inv_sum = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
  double abs_dev = 0.0;
  double sq = 0.0;
  bool any_zero = false;
  bool any_pos = false;
  bool any_neg = false;
  for (double v : d) {
    const double dev = v - mean;
    m2 += dev * dev;
    m4 += dev * dev * dev * dev;
    abs_dev += std::abs(dev);
    sq += v * v;
    any_zero |= v == 0.0;
    any_pos |= v > 0.0;
    any_neg |= v < 0.0;
    if (v != 0.0) inv_sum += 1.0 / v;
  }
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  std::array<double, kStatFeatureCount> out{};
  out[static_cast<std::size_t>(StatFeature::HarmonicMean)] =
      (any_zero || (any_pos && any_neg)) ? kNaN : n / inv_sum;
  out[static_cast<std::size_t>(StatFeature::StdDev)] = d.size() > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
  out[static_cast<std::size_t>(StatFeature::MeanDeviation)] = abs_dev / n;
  // Ratio of population moments, no excess or bias correction.
  out[static_cast<std::size_t>(StatFeature::Kurtosis)] = m2 > 0.0 ? (m4 / n) / ((m2 / n) * (m2 / n)) : kNaN;
  out[static_cast<std::size_t>(StatFeature::Rms)] = std::sqrt(sq / n);
  out[static_cast<std::size_t>(StatFeature::Peak)] = *hi;
  out[static_cast<std::size_t>(StatFeature::Range)] = *hi - *lo;
  return out;
}

StatFeatureVector stat_features(const WindowMatrix& w) {
  if (w.data.empty()) throw Error("statistics of an empty window");
  StatFeatureVector out;
  out.values.reserve(w.data.rows() * kStatFeatureCount);
  for (std::size_t ch = 0; ch < w.data.rows(); ++ch) {
    const auto s = channel_stats(w.data.row(ch));
    out.values.insert(out.values.end(), s.begin(), s.end());
  }
  out.defined.reserve(out.values.size());
  for (double v : out.values) out.defined.push_back(std::isfinite(v));
  out.window_index = w.window_index;
  out.subject_id = w.subject_id;
  out.label = w.label;
  return out;
}

std::vector<Complex> dft_direct(std::span<const Complex> x, bool inverse) {
  const std::size_t n = x.size();
  if (n == 0) throw Error("DFT of an empty sequence");
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> table(n);
  for (std::size_t k = 0; k < n; ++k) table[k] = twiddle(k, n, sign);
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) acc += x[j] * table[(k * j) % n];
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

std::vector<Complex> fft_radix2(std::span<const Complex> x, bool inverse) {
  const std::size_t n = x.size();
  if (!is_pow2(n)) throw Error(fmt::format("radix-2 FFT needs a power-of-two length, got {}", n));
  std::vector<Complex> a(x.begin(), x.end());
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<Complex> w(half);
    for (std::size_t k = 0; k < half; ++k) w[k] = twiddle(k, len, sign);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
  return a;
}

std::vector<Complex> dft(std::span<const Complex> x) { return transform(x, false); }
std::vector<Complex> idft(std::span<const Complex> x) { return transform(x, true); }

Recording bandpass_mask(const Recording& rec, double lo_hz, double hi_hz) {
  const double nyquist = rec.sample_rate_hz / 2.0;
  if (!(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz <= nyquist)) {
    throw Error(fmt::format("invalid band [{}, {}] Hz for sample rate {} Hz", lo_hz, hi_hz, rec.sample_rate_hz));
  }
  const std::size_t t = rec.n_samples();
  const double bin_hz = rec.sample_rate_hz / static_cast<double>(t);
  Recording out = rec;
  std::vector<Complex> buf(t);
  for (std::size_t ch = 0; ch < rec.n_channels(); ++ch) {
    auto row = rec.data.row(ch);
    for (std::size_t i = 0; i < t; ++i) buf[i] = {row[i], 0.0};
    auto spec = dft(buf);
    for (std::size_t k = 0; k < t; ++k) {
      // Bin k and bin t-k share the frequency min(k, t-k) * bin_hz.
      const double f = static_cast<double>(std::min(k, t - k)) * bin_hz;
      if (f < lo_hz || f > hi_hz) spec[k] = 0.0;
    }
    const auto back = idft(spec);
    auto orow = out.data.row(ch);
    double scale = 0.0;
    double residue = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      orow[i] = back[i].real();
      scale = std::max(scale, std::abs(back[i].real()));
      residue = std::max(residue, std::abs(back[i].imag()));
    }
    if (residue > 1e-9 * std::max(scale, 1.0)) {
      throw Error(fmt::format("band-pass output of channel {} is not real (residue {})", ch, residue));
    }
  }
  return out;
}

}  // namespace rmtfeat
