#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmtfeat/ingest.hpp"
#include "rmtfeat/matrix.hpp"

namespace rmtfeat {

enum class EntryLaw { Gaussian, Rademacher, Uniform };
std::string_view entry_law_name(EntryLaw law);
EntryLaw parse_entry_law(std::string_view name);
// E[x^4] - 3 for the standardized law: 0, -2 and -1.2.
double fourth_cumulant(EntryLaw law);

struct EnsembleSpec {
  EntryLaw entry_law{EntryLaw::Gaussian};
  std::size_t n{0};
  std::size_t t{0};
  std::uint64_t seed{0};
};

// N x T matrix of i.i.d. mean-0 variance-1 entries; uniform entries live on
// [-sqrt 3, sqrt 3].
WindowMatrix gen_ensemble(const EnsembleSpec& spec);

struct Spike {
  std::vector<double> direction;  // normalized on use
  double strength{1.0};           // variance along the direction
};

struct ClassSpec {
  std::string label;
  Matrix base_covariance;
  double noise_floor{0.0};  // extra white-noise variance on every channel
};

// Covariance (1 - rho) I + rho 11^T + sum (s - 1) v v^T. Strength 1 adds
// nothing; strengths below 1 are rejected.
ClassSpec make_class_spec(std::string label, std::size_t n, double correlation, std::span<const Spike> spikes,
                          double noise_floor = 0.0);

std::vector<double> random_unit_vector(std::size_t n, std::uint64_t seed);

// One spiked class per strength, each spike along its own seeded random
// direction, with zero channel correlation.
std::vector<ClassSpec> spiked_classes(std::size_t n, std::span<const std::string> labels,
                                      std::span<const double> strengths, std::uint64_t seed);

struct RecordingPlan {
  std::size_t subjects_per_class{1};
  std::size_t windows_per_subject{1};
  std::size_t delta_t{200};
  double sample_rate_hz{1000.0};
  std::uint64_t seed{0};
  unsigned threads{1};
};

// One recording per (class, subject) with T = windows_per_subject * delta_t.
// Columns are B^{1/2} z with z standard normal; each window draws from its own
// stream derived from (seed, class, subject, window).
std::vector<Recording> gen_recording(std::span<const ClassSpec> classes, const RecordingPlan& plan);

}  // namespace rmtfeat
