#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rmtfeat/matrix.hpp"

namespace rmtfeat {

// One subject's multichannel recording: channels are rows, samples columns.
struct Recording {
  Matrix data;                             // N x T
  std::vector<std::string> channel_names;  // size N
  double sample_rate_hz{1000.0};
  std::optional<std::string> label;  // state tag, e.g. HC / FES / CHR
  std::string subject_id;

  std::size_t n_channels() const { return data.rows(); }
  std::size_t n_samples() const { return data.cols(); }
};

// Throws rmtfeat::Error unless N >= 2, T >= N, names match N, the sample rate
// is positive and every value is finite.
void validate(const Recording& rec);

struct WindowConfig {
  std::size_t delta_t{200};
  bool drop_partial{true};
};

// Windows shorter than 150 or longer than 500 samples still work but fall
// outside the 3-8x oversampling range usually recommended for N = 64.
std::optional<std::string> window_size_warning(const WindowConfig& cfg);

struct WindowMatrix {
  Matrix data;  // N x delta_t
  std::size_t window_index{0};
  std::string subject_id;
  std::optional<std::string> label;
};

enum class RecordingFormat { Csv, BinaryF64 };

// ".csv" -> Csv, anything else -> BinaryF64.
RecordingFormat format_for_path(const std::filesystem::path& path);

// CSV: header row of channel names, then one row of T samples per channel.
// CSV carries no sample rate, so `csv_sample_rate_hz` is attached on load.
// Binary: "RMTS", u32 N, u64 T, f64 rate, 8 reserved zero bytes, then N*T
// little-endian f64 row-major.
Recording load_recording(const std::filesystem::path& path, RecordingFormat format,
                         double csv_sample_rate_hz = 1000.0);
void save_recording(const Recording& rec, const std::filesystem::path& path,
                    RecordingFormat format);

// L = floor(T / delta_t) disjoint windows covering [i*dT, (i+1)*dT). With
// drop_partial=false a trailing remainder of at least 2 samples is emitted as
// a shorter last window.
std::vector<WindowMatrix> block_windows(const Recording& rec, const WindowConfig& cfg);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace rmtfeat
