#include "rmtfeat/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"
#include "rmtfeat/features.hpp"
#include "rmtfeat/parallel.hpp"

namespace rmtfeat {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(fmt::format("line {}: '{}' is not a number", line, s));
  }
  return v;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

EigenSpectrum window_spectrum(const WindowMatrix& w, CovNormalization normalization) {
  return eigen_spectrum(sample_covariance(standardize(w), normalization));
}

std::string les_column_name(const TestFunction& phi) { return "les_" + phi.name(); }

FeatureTable extract_features(std::span<const Recording> recordings, const ExtractOptions& opts) {
  FeatureTable table;
  for (const auto& phi : opts.test_functions) table.columns.push_back(les_column_name(phi));
  if (opts.stat_features && !recordings.empty()) {
    for (const auto& name : recordings.front().channel_names) {
      for (std::size_t f = 0; f < kStatFeatureCount; ++f) {
        table.columns.push_back(fmt::format("{}_{}", name, stat_feature_name(static_cast<StatFeature>(f))));
      }
    }
  }
  struct Job {
    const Recording* rec;
    WindowMatrix window;
  };
  std::vector<Job> jobs;
  const WindowConfig cfg{opts.delta_t, true};
  for (const auto& rec : recordings) {
    if (opts.stat_features && rec.n_channels() != recordings.front().n_channels()) {
      throw Error("statistical features need the same channel count in every recording");
    }
    for (auto& w : block_windows(rec, cfg)) jobs.push_back({&rec, std::move(w)});
  }
  table.rows.resize(jobs.size());
  parallel_for(jobs.size(), opts.threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    auto& row = table.rows[i];
    row.subject_id = job.rec->subject_id;
    row.label = job.rec->label.value_or("");
    row.window_index = job.window.window_index;
    if (!opts.test_functions.empty()) {
      const EigenSpectrum spec = window_spectrum(job.window, opts.normalization);
      std::optional<EigenSpectrum> normalized;
      for (const auto& phi : opts.test_functions) {
        if (phi.kind() == TestFunctionKind::VonNeumannEntropy) {
          if (!normalized) normalized = trace_normalize(spec);
          row.values.push_back(les(*normalized, phi, opts.normalize_les).value);
        } else {
          row.values.push_back(les(spec, phi, opts.normalize_les).value);
        }
      }
    }
    if (opts.stat_features) {
      const auto stats = stat_features(job.window);
      row.values.insert(row.values.end(), stats.values.begin(), stats.values.end());
    }
  });
  return table;
}

std::string FeatureTable::to_csv() const {
  std::string out = "subject_id,label,window_index";
  for (const auto& c : columns) out += "," + c;
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{},{},{}", r.subject_id, r.label, r.window_index);
    for (double v : r.values) out += std::isnan(v) ? std::string(",nan") : fmt::format(",{}", v);
    out += '\n';
  }
  return out;
}

FeatureTable FeatureTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty feature table");
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "label" || header[2] != "window_index") {
    throw Error("feature table must start with subject_id,label,window_index");
  }
  FeatureTable t;
  t.columns.assign(header.begin() + 3, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(fmt::format("line {} has {} fields, expected {}", lineno, cells.size(), header.size()));
    }
    Row r;
    r.subject_id = cells[0];
    r.label = cells[1];
    r.window_index = static_cast<std::size_t>(parse_number(cells[2], lineno));
    for (std::size_t i = 3; i < cells.size(); ++i) r.values.push_back(parse_number(cells[i], lineno));
    t.rows.push_back(std::move(r));
  }
  return t;
}

FeatureTable FeatureTable::aggregate_by_subject() const {
  FeatureTable out;
  out.columns = columns;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> counts;
  for (const auto& r : rows) {
    auto [it, inserted] = index.emplace(r.subject_id, out.rows.size());
    if (inserted) {
      out.rows.push_back({r.subject_id, r.label, 0, std::vector<double>(columns.size(), 0.0)});
      counts.push_back(0);
    }
    auto& agg = out.rows[it->second];
    for (std::size_t c = 0; c < columns.size(); ++c) agg.values[c] += r.values[c];
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < out.rows.size(); ++i)
    for (double& v : out.rows[i].values) v /= static_cast<double>(counts[i]);
  return out;
}

Dataset FeatureTable::to_dataset(const std::function<bool(const std::string&)>& keep,
                                 std::vector<std::string>* used, std::vector<std::string>* dropped) const {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!keep(columns[c])) continue;
    bool finite = true;
    for (const auto& r : rows) finite = finite && std::isfinite(r.values[c]);
    if (finite) {
      cols.push_back(c);
      if (used) used->push_back(columns[c]);
    } else if (dropped) {
      dropped->push_back(columns[c]);
    }
  }
  if (cols.empty()) throw Error("no usable feature columns selected");
  Dataset ds;
  for (const auto& r : rows) {
    std::vector<double> x;
    x.reserve(cols.size());
    for (std::size_t c : cols) x.push_back(r.values[c]);
    ds.rows.push_back(std::move(x));
    ds.labels.push_back(r.label);
    ds.group_keys.push_back(r.subject_id);
  }
  return ds;
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest) {
  std::istringstream in(read_text(manifest));
  std::string line;
  if (!std::getline(in, line)) throw Error("empty manifest " + manifest.string());
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"path", "subject_id", "label", "sample_rate_hz"}) {
    throw Error("manifest header must be path,subject_id,label,sample_rate_hz");
  }
  std::vector<ManifestEntry> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw Error(fmt::format("manifest line {} needs 4 fields", lineno));
    out.push_back({cells[0], cells[1], cells[2], parse_number(cells[3], lineno)});
  }
  return out;
}

std::string manifest_csv(std::span<const ManifestEntry> entries) {
  std::string out = "path,subject_id,label,sample_rate_hz\n";
  for (const auto& e : entries) out += fmt::format("{},{},{},{}\n", e.path, e.subject_id, e.label, e.sample_rate_hz);
  return out;
}

std::vector<Recording> load_recordings(const fs::path& input, double csv_sample_rate_hz) {
  if (!fs::exists(input)) throw Error("input does not exist: " + input.string());
  std::vector<Recording> out;
  if (fs::is_directory(input)) {
    for (const auto& e : read_manifest(input / "manifest.csv")) {
      const fs::path p = input / e.path;
      Recording r = load_recording(p, format_for_path(p), e.sample_rate_hz);
      if (format_for_path(p) == RecordingFormat::BinaryF64 && r.sample_rate_hz != e.sample_rate_hz) {
        throw Error(fmt::format("{}: header sample rate {} disagrees with manifest {}", e.path,
                                r.sample_rate_hz, e.sample_rate_hz));
      }
      r.subject_id = e.subject_id;
      if (!e.label.empty()) r.label = e.label;
      out.push_back(std::move(r));
    }
    if (out.empty()) throw Error("manifest lists no recordings");
  } else {
    out.push_back(load_recording(input, format_for_path(input), csv_sample_rate_hz));
  }
  return out;
}

}  // namespace rmtfeat
