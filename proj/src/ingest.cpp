#include "rmtfeat/ingest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"

namespace rmtfeat {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic{'R', 'M', 'T', 'S'};
constexpr std::size_t kHeaderBytes = 32;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  double v = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw Error(fmt::format("unparseable value '{}' at ({},{})", cell, row, col));
  }
  if (!std::isfinite(v)) throw NonFiniteValue(row, col);
  return v;
}

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(const char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

Recording parse_csv(const std::string& text, double sample_rate) {
  std::istringstream in(text);
  std::string line;
  Recording rec;
  rec.sample_rate_hz = sample_rate;
  if (!std::getline(in, line)) throw Error("empty CSV");
  for (auto name : split_commas(line)) rec.channel_names.emplace_back(name);

  std::vector<double> values;
  std::size_t t = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (row == 0) {
      t = cells.size();
    } else if (cells.size() != t) {
      throw Error(fmt::format("row {} has {} samples, expected {}", row, cells.size(), t));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) values.push_back(parse_cell(cells[c], row, c));
    ++row;
  }
  if (row != rec.channel_names.size()) {
    throw Error(fmt::format("header names {} channels but body has {} rows",
                            rec.channel_names.size(), row));
  }
  rec.data = Matrix(row, t, std::move(values));
  return rec;
}

Recording parse_binary(const std::string& bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw Error("not an RMTS binary recording");
  }
  const auto n = get_le<std::uint32_t>(bytes.data() + 4);
  const auto t = get_le<std::uint64_t>(bytes.data() + 8);
  const auto rate = get_le<double>(bytes.data() + 16);
  const std::uint64_t expected = kHeaderBytes + std::uint64_t{n} * t * 8;
  if (bytes.size() != expected) {
    throw Error(fmt::format("binary body holds {} bytes, header implies {}x{} values",
                            bytes.size() - kHeaderBytes, n, t));
  }
  std::vector<double> values(static_cast<std::size_t>(n) * t);
  const char* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i, p += 8) {
    values[i] = get_le<double>(p);
    if (!std::isfinite(values[i])) throw NonFiniteValue(i / t, i % t);
  }
  Recording rec;
  rec.data = Matrix(n, t, std::move(values));
  rec.sample_rate_hz = rate;
  for (std::uint32_t i = 0; i < n; ++i) rec.channel_names.push_back(fmt::format("ch{}", i));
  return rec;
}

}  // namespace

void validate(const Recording& rec) {
  const std::size_t n = rec.n_channels();
  const std::size_t t = rec.n_samples();
  if (n < 2) throw Error(fmt::format("recording needs at least 2 channels, got {}", n));
  if (t < n) throw Error(fmt::format("recording has T={} samples < N={} channels", t, n));
  if (rec.channel_names.size() != n) {
    throw Error(fmt::format("{} channel names for {} channels", rec.channel_names.size(), n));
  }
  if (!(rec.sample_rate_hz > 0.0) || !std::isfinite(rec.sample_rate_hz)) {
    throw Error("sample rate must be positive");
  }
  for (std::size_t r = 0; r < n; ++r) {
    auto row = rec.data.row(r);
    for (std::size_t c = 0; c < t; ++c) {
      if (!std::isfinite(row[c])) throw NonFiniteValue(r, c);
    }
  }
}

std::optional<std::string> window_size_warning(const WindowConfig& cfg) {
  if (cfg.delta_t < 150 || cfg.delta_t > 500) {
    return fmt::format("window length {} is outside the recommended 150-500 samples", cfg.delta_t);
  }
  return std::nullopt;
}

RecordingFormat format_for_path(const fs::path& path) {
  return path.extension() == ".csv" ? RecordingFormat::Csv : RecordingFormat::BinaryF64;
}

Recording load_recording(const fs::path& path, RecordingFormat format, double csv_sample_rate_hz) {
  const std::string contents = read_all(path);
  Recording rec = format == RecordingFormat::Csv ? parse_csv(contents, csv_sample_rate_hz)
                                                 : parse_binary(contents);
  rec.subject_id = path.stem().string();
  validate(rec);
  return rec;
}

void save_recording(const Recording& rec, const fs::path& path, RecordingFormat format) {
  validate(rec);
  std::string out;
  if (format == RecordingFormat::Csv) {
    for (std::size_t i = 0; i < rec.channel_names.size(); ++i) {
      if (i) out += ',';
      out += rec.channel_names[i];
    }
    out += '\n';
    for (std::size_t r = 0; r < rec.n_channels(); ++r) {
      auto row = rec.data.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ',';
        // Shortest representation that round-trips exactly.
        out += fmt::format("{}", row[c]);
      }
      out += '\n';
    }
  } else {
    out.reserve(kHeaderBytes + rec.data.values().size() * 8);
    out.append(kMagic.data(), kMagic.size());
    put_le(out, static_cast<std::uint32_t>(rec.n_channels()));
    put_le(out, static_cast<std::uint64_t>(rec.n_samples()));
    put_le(out, rec.sample_rate_hz);
    out.append(8, '\0');
    for (double v : rec.data.values()) put_le(out, v);
  }
  write_file_atomic(path, out);
}

std::vector<WindowMatrix> block_windows(const Recording& rec, const WindowConfig& cfg) {
  if (cfg.delta_t < 2) throw Error("window length must be at least 2");
  const std::size_t t = rec.n_samples();
  if (cfg.delta_t > t) {
    throw Error(fmt::format("window length {} exceeds recording length {}", cfg.delta_t, t));
  }
  const std::size_t full = t / cfg.delta_t;
  std::vector<WindowMatrix> out;
  out.reserve(full + 1);
  for (std::size_t i = 0; i < full; ++i) {
    out.push_back({rec.data.column_block(i * cfg.delta_t, cfg.delta_t), i, rec.subject_id, rec.label});
  }
  const std::size_t rest = t - full * cfg.delta_t;
  if (!cfg.drop_partial && rest >= 2) {
    out.push_back({rec.data.column_block(full * cfg.delta_t, rest), full, rec.subject_id, rec.label});
  }
  return out;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace rmtfeat
