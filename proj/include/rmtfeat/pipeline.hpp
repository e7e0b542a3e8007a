#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rmtfeat/classify.hpp"
#include "rmtfeat/ingest.hpp"
#include "rmtfeat/linalg.hpp"
#include "rmtfeat/rmt.hpp"

namespace rmtfeat {

// standardize -> sample covariance -> eigenvalues, for one window.
EigenSpectrum window_spectrum(const WindowMatrix& w, CovNormalization normalization);

struct ExtractOptions {
  std::size_t delta_t{200};
  CovNormalization normalization{CovNormalization::PerSample};
  std::vector<TestFunction> test_functions;
  bool normalize_les{false};  // divide each LES by N
  bool stat_features{false};  // append the 7N per-channel statistics
  unsigned threads{1};
};

// One row per window: provenance plus the requested feature columns.
struct FeatureTable {
  struct Row {
    std::string subject_id;
    std::string label;
    std::size_t window_index{0};
    std::vector<double> values;
  };
  std::vector<std::string> columns;
  std::vector<Row> rows;

  std::string to_csv() const;
  static FeatureTable from_csv(const std::string& text);

  // Mean of every column over each subject's windows, in first-seen order.
  FeatureTable aggregate_by_subject() const;

  // Columns accepted by `keep` that are finite in every row. Columns holding
  // an undefined (NaN) entry are skipped and listed in `dropped`.
  Dataset to_dataset(const std::function<bool(const std::string&)>& keep, std::vector<std::string>* used,
                     std::vector<std::string>* dropped) const;
};

std::string les_column_name(const TestFunction& phi);

FeatureTable extract_features(std::span<const Recording> recordings, const ExtractOptions& opts);

// manifest.csv: path,subject_id,label,sample_rate_hz with paths relative to
// the manifest's directory.
struct ManifestEntry {
  std::string path;
  std::string subject_id;
  std::string label;
  double sample_rate_hz{1000.0};
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
std::string manifest_csv(std::span<const ManifestEntry> entries);

// A directory is read through its manifest.csv; a single file is one
// unlabeled recording named after its stem.
std::vector<Recording> load_recordings(const std::filesystem::path& input, double csv_sample_rate_hz = 1000.0);

}  // namespace rmtfeat
