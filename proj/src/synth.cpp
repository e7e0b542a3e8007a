#include "rmtfeat/synth.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"
#include "rmtfeat/linalg.hpp"
#include "rmtfeat/parallel.hpp"
#include "rmtfeat/rng.hpp"

namespace rmtfeat {

std::string_view entry_law_name(EntryLaw law) {
  switch (law) {
    case EntryLaw::Gaussian: return "gaussian";
    case EntryLaw::Rademacher: return "rademacher";
    case EntryLaw::Uniform: return "uniform";
  }
  return "?";
}

EntryLaw parse_entry_law(std::string_view name) {
  if (name == "gaussian") return EntryLaw::Gaussian;
  if (name == "rademacher") return EntryLaw::Rademacher;
  if (name == "uniform") return EntryLaw::Uniform;
  throw Error(fmt::format("unknown entry law '{}'", name));
}

double fourth_cumulant(EntryLaw law) {
  switch (law) {
    case EntryLaw::Gaussian: return 0.0;
    case EntryLaw::Rademacher: return -2.0;
    case EntryLaw::Uniform: return -1.2;
  }
  return 0.0;
}

WindowMatrix gen_ensemble(const EnsembleSpec& spec) {
  if (spec.n == 0 || spec.t == 0) throw Error("ensemble needs positive dimensions");
  Rng rng(derive_seed(spec.seed, 0xe45e));
  Matrix m(spec.n, spec.t);
  const double root3 = std::sqrt(3.0);
  for (double& v : m.values()) {
    switch (spec.entry_law) {
      case EntryLaw::Gaussian: v = rng.normal(); break;
      case EntryLaw::Rademacher: v = (rng.next_u64() >> 63) ? 1.0 : -1.0; break;
      case EntryLaw::Uniform: v = root3 * (2.0 * rng.uniform() - 1.0); break;
    }
  }
  return {std::move(m), 0, fmt::format("{}-{}", entry_law_name(spec.entry_law), spec.seed), std::nullopt};
}

std::vector<double> random_unit_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x0d1));
  std::vector<double> v(n);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

ClassSpec make_class_spec(std::string label, std::size_t n, double correlation, std::span<const Spike> spikes,
                          double noise_floor) {
  if (n < 2) throw Error("class covariance needs at least 2 channels");
  if (!(correlation >= 0.0 && correlation < 1.0)) throw Error("channel correlation must be in [0, 1)");
  if (!(noise_floor >= 0.0)) throw Error("noise floor must be non-negative");
  Matrix b(n, n, correlation);
  for (std::size_t i = 0; i < n; ++i) b(i, i) = 1.0 + noise_floor;
  for (const auto& spike : spikes) {
    if (spike.direction.size() != n) throw Error("spike direction has the wrong length");
    if (!(spike.strength >= 1.0)) throw Error(fmt::format("spike strength {} is below 1", spike.strength));
    double norm = 0.0;
    for (double x : spike.direction) norm += x * x;
    if (!(norm > 0.0)) throw Error("spike direction is zero");
    const double w = (spike.strength - 1.0) / norm;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) b(i, j) += w * spike.direction[i] * spike.direction[j];
  }
  return {std::move(label), std::move(b), noise_floor};
}

std::vector<ClassSpec> spiked_classes(std::size_t n, std::span<const std::string> labels,
                                      std::span<const double> strengths, std::uint64_t seed) {
  if (labels.size() != strengths.size()) throw Error("one spike strength per class label is required");
  std::vector<ClassSpec> out;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const Spike spike{random_unit_vector(n, derive_seed(seed, c)), strengths[c]};
    out.push_back(make_class_spec(labels[c], n, 0.0, std::span(&spike, 1)));
  }
  return out;
}

std::vector<Recording> gen_recording(std::span<const ClassSpec> classes, const RecordingPlan& plan) {
  if (classes.empty()) throw Error("no classes to generate");
  const std::size_t n = classes.front().base_covariance.rows();
  if (plan.delta_t < 2 || plan.windows_per_subject == 0 || plan.subjects_per_class == 0) {
    throw Error("recording plan needs delta_t >= 2 and at least one subject and window");
  }
  std::vector<Matrix> roots;
  for (const auto& cls : classes) {
    if (cls.base_covariance.rows() != n || cls.base_covariance.cols() != n) {
      throw Error("all classes must share the channel count");
    }
    const auto e = jacobi_eigen(cls.base_covariance, false);
    if (!(e.values.front() > 1e-12 * std::abs(e.values.back()))) {
      throw Error(fmt::format("covariance of class {} is not positive definite", cls.label));
    }
    roots.push_back(sqrt_psd(cls.base_covariance));
  }

  const std::size_t t = plan.windows_per_subject * plan.delta_t;
  std::vector<Recording> recs;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t s = 0; s < plan.subjects_per_class; ++s) {
      Recording r;
      r.data = Matrix(n, t);
      for (std::size_t ch = 0; ch < n; ++ch) r.channel_names.push_back(fmt::format("ch{}", ch));
      r.sample_rate_hz = plan.sample_rate_hz;
      r.label = classes[c].label;
      r.subject_id = fmt::format("{}_{:03}", classes[c].label, s);
      recs.push_back(std::move(r));
    }
  }
  const std::size_t per_class = plan.subjects_per_class * plan.windows_per_subject;
  parallel_for(classes.size() * per_class, plan.threads, [&](std::size_t job) {
    const std::size_t c = job / per_class;
    const std::size_t s = (job % per_class) / plan.windows_per_subject;
    const std::size_t w = job % plan.windows_per_subject;
    Rng rng(derive_seed(plan.seed, c, s, w));
    Matrix z(n, plan.delta_t);
    for (double& v : z.values()) v = rng.normal();
    const Matrix x = multiply(roots[c], z);
    Recording& rec = recs[c * plan.subjects_per_class + s];
    for (std::size_t ch = 0; ch < n; ++ch) {
      auto src = x.row(ch);
      std::copy(src.begin(), src.end(), rec.data.row(ch).begin() + static_cast<std::ptrdiff_t>(w * plan.delta_t));
    }
  });
  return recs;
}

}  // namespace rmtfeat
