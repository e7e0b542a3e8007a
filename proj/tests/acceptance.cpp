// Acceptance checks AC1-AC9. One line per criterion; exit status 1 if any fails.

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>
#include <unistd.h>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "rmtfeat/classify.hpp"
#include "rmtfeat/features.hpp"
#include "rmtfeat/ingest.hpp"
#include "rmtfeat/linalg.hpp"
#include "rmtfeat/parallel.hpp"
#include "rmtfeat/pipeline.hpp"
#include "rmtfeat/rmt.hpp"
#include "rmtfeat/rng.hpp"
#include "rmtfeat/stats.hpp"
#include "rmtfeat/synth.hpp"

namespace fs = std::filesystem;
using namespace rmtfeat;

namespace {

struct Outcome {
  bool ok{true};
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond) ok = false;
    if (!cond || detail.size() < 400) detail += (detail.empty() ? "" : "; ") + what + (cond ? "" : " [x]");
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EigenSpectrum raw_spectrum(const WindowMatrix& w) {
  return eigen_spectrum(sample_covariance(w, CovNormalization::PerSample));
}

Outcome ac1() {
  Outcome out;
  for (auto law : {EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::Uniform}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto w = gen_ensemble({law, 200, 1000, 101});
    const double ks = esd_ks_distance(raw_spectrum(w), MPLaw::from_dimensions(200, 1000));
    const double secs = seconds_since(t0);
    out.require(ks < 0.05 && secs < 10.0,
                fmt::format("{} KS={:.4f} ({:.2f}s)", entry_law_name(law), ks, secs));
  }
  return out;
}

// Each of the four test functions is applied to a mean-one spectrum. For the entropy
// form that spectrum is N times the trace-normalized one, so
// n^-1 sum phi = H - log N with H the von Neumann entropy of the window.
Outcome ac2() {
  Outcome out;
  const std::size_t n = 200;
  const std::size_t dt = 800;
  const auto law = MPLaw::from_dimensions(n, dt);
  const std::vector<TestFunction> fns{TestFunction::lrt(), TestFunction::wasserstein(), TestFunction::nagao(),
                                      TestFunction::von_neumann_entropy()};
  std::vector<double> mean(fns.size(), 0.0);
  const int windows = 20;
  for (int i = 0; i < windows; ++i) {
    const auto s = raw_spectrum(gen_ensemble({EntryLaw::Gaussian, n, dt, derive_seed(202, i)}));
    for (std::size_t f = 0; f < 3; ++f) mean[f] += les(s, fns[f], true).value / windows;
    const double h = les(trace_normalize(s), fns[3]).value;
    mean[3] += (h - std::log(static_cast<double>(n))) / windows;
  }
  for (std::size_t f = 0; f < fns.size(); ++f) {
    const double limit = les_lln_limit(fns[f], law);
    out.require(std::abs(mean[f] - limit) < 0.05,
                fmt::format("{} {:.4f} vs {:.4f}", fns[f].name(), mean[f], limit));
  }
  return out;
}

Outcome ac3() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  for (double c : {0.1, 0.25, 0.5, 0.75, 1.0}) {
    const double v = clt_variance(TestFunction::identity(), {c, 0.0, 128});
    out.require(std::abs(v - 2.0 * c) < 1e-6, fmt::format("Var_id(c={})={:.9f}", c, v));
  }
  const std::size_t n = 50;
  const std::size_t dt = 200;
  const std::size_t windows = 2000;
  std::vector<double> id(windows);
  std::vector<double> nag(windows);
  parallel_for(windows, std::max(1u, std::thread::hardware_concurrency()), [&](std::size_t i) {
    const auto s = raw_spectrum(gen_ensemble({EntryLaw::Gaussian, n, dt, derive_seed(303, i)}));
    id[i] = les(s, TestFunction::identity()).value;
    nag[i] = les(s, TestFunction::nagao()).value;
  });
  auto variance = [](const std::vector<double>& x) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
  };
  const double c = static_cast<double>(n) / static_cast<double>(dt);
  for (const auto& [name, phi, samples] :
       {std::tuple{"identity", TestFunction::identity(), &id}, std::tuple{"nagao", TestFunction::nagao(), &nag}}) {
    const double theory = clt_variance(phi, {c, 0.0, 128});
    const double mc = variance(*samples);
    out.require(std::abs(mc - theory) <= 0.15 * theory,
                fmt::format("{} MC {:.4f} vs {:.4f}", name, mc, theory));
  }
  const double secs = seconds_since(t0);
  out.require(secs < 120.0, fmt::format("{:.1f}s", secs));
  return out;
}

Outcome ac4() {
  Outcome out;
  Rng rng(404);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(20);
    const std::size_t rank = 1 + rng.below(n);
    Matrix g(n, rank);
    for (double& v : g.values()) v = rng.normal();
    const double h = von_neumann_entropy({gram(g), 0, CovNormalization::PerSample});
    if (!(h >= -1e-12 && h <= std::log(static_cast<double>(n)) + 1e-12)) ++bad;
  }
  out.require(bad == 0, fmt::format("{} of 1000 outside [0, log n]", bad));
  double worst_mixed = 0.0;
  double worst_pure = 0.0;
  for (std::size_t n = 1; n <= 32; ++n) {
    const double h = von_neumann_entropy({(1.0 / n) * Matrix::identity(n), 0, CovNormalization::PerSample});
    worst_mixed = std::max(worst_mixed, std::abs(h - std::log(static_cast<double>(n))));
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    Matrix p(n, n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) p(a, b) = v[a] * v[b];
    worst_pure = std::max(worst_pure, std::abs(von_neumann_entropy({p, 0, CovNormalization::PerSample})));
  }
  out.require(worst_mixed < 1e-10, fmt::format("max |H(I/n) - log n| = {:.1e}", worst_mixed));
  out.require(worst_pure < 1e-10, fmt::format("max |H(rank one)| = {:.1e}", worst_pure));
  return out;
}

Outcome ac5() {
  Outcome out;
  Rng rng(505);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng.below(8);
    Matrix a(n, n);
    oracle::Dense d(n, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c <= r; ++c) a(r, c) = a(c, r) = d[r][c] = d[c][r] = rng.normal();
    const auto e = jacobi_eigen(a, false);
    const auto ref = oracle::bisection_eigenvalues(d);
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(e.values[k] - ref[k]));
  }
  out.require(worst < 1e-6, fmt::format("max eigenvalue error {:.1e}", worst));
  double worst_rec = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Matrix g(64, 200);
    for (double& v : g.values()) v = rng.normal();
    Matrix a = (1.0 / 200.0) * gram(g);
    const auto e = jacobi_eigen(a);
    worst_rec = std::max(worst_rec, (reconstruct(e) - a).frobenius_norm() / a.frobenius_norm());
  }
  out.require(worst_rec < 1e-8, fmt::format("N=64 reconstruction {:.1e}", worst_rec));
  return out;
}

Outcome ac6() {
  Outcome out;
  const std::vector<std::vector<double>> groups{{1, 2}, {3, 4}};
  const auto r = anova_oneway(groups);
  const double ref = oracle::f12_survival(8.0);
  out.require(r.f_statistic == 8.0, fmt::format("F={}", r.f_statistic));
  out.require(std::abs(r.p_value - ref) < 1e-4 && std::abs(r.p_value - 0.1056) < 1e-4,
              fmt::format("p={:.6f} oracle {:.6f}", r.p_value, ref));
  Rng rng(606);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double d1 = 1.0 + static_cast<double>(rng.below(30));
    const double d2 = 1.0 + static_cast<double>(rng.below(120));
    const double x = 15.0 * rng.uniform() * rng.uniform();
    const double y = d1 * x / (d1 * x + d2);
    worst = std::max(worst, std::abs(f_cdf(x, d1, d2) - boost::math::ibeta(d1 / 2.0, d2 / 2.0, y)));
  }
  out.require(worst < 1e-10, fmt::format("f_cdf grid max error {:.1e}", worst));
  return out;
}

double cv_accuracy(const std::vector<Recording>& recs, bool shuffle, std::uint64_t shuffle_seed) {
  ExtractOptions eo;
  eo.delta_t = 200;
  eo.test_functions = {TestFunction::von_neumann_entropy()};
  eo.threads = std::max(1u, std::thread::hardware_concurrency());
  const auto table = extract_features(recs, eo);
  Dataset ds = table.to_dataset([](const std::string&) { return true; }, nullptr, nullptr);
  if (shuffle) ds = permute_labels(ds, shuffle_seed);
  ModelSpec spec;
  spec.kind = ModelKind::SvmRbf;
  CvOptions cv;
  cv.n_repeats = 10;
  cv.seed = 77;
  cv.group_by_subject = true;
  cv.threads = eo.threads;
  return cross_validate(ds, spec, cv).mean_accuracy;
}

std::vector<Recording> spiked_recordings(std::vector<std::string> labels, std::vector<double> strengths,
                                         std::uint64_t seed) {
  RecordingPlan plan;
  plan.subjects_per_class = 40;
  plan.windows_per_subject = 5;
  plan.delta_t = 200;
  plan.seed = seed;
  plan.threads = std::max(1u, std::thread::hardware_concurrency());
  return gen_recording(spiked_classes(64, labels, strengths, seed + 1), plan);
}

Outcome ac7() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto two = spiked_recordings({"HC", "SP"}, {1.0, 10.0}, 701);
  const double acc2 = cv_accuracy(two, false, 0);
  out.require(acc2 > 0.90, fmt::format("two-class {:.3f}", acc2));
  const auto three = spiked_recordings({"A", "B", "C"}, {1.0, 4.0, 10.0}, 702);
  const double acc3 = cv_accuracy(three, false, 0);
  out.require(acc3 > 0.60 && acc3 >= 1.0 / 3.0 + 0.15, fmt::format("three-class {:.3f}", acc3));
  // A single subject-level permutation of 80 subjects still overlaps the true
  // classes by chance, so the control averages ten independent permutations.
  double shuffled = 0.0;
  for (std::uint64_t k = 0; k < 10; ++k) shuffled += cv_accuracy(two, true, derive_seed(703, k)) / 10.0;
  out.require(std::abs(shuffled - 0.5) < 0.1, fmt::format("shuffled {:.3f}", shuffled));
  const double secs = seconds_since(t0);
  out.require(secs < 300.0, fmt::format("{:.1f}s", secs));
  return out;
}

Outcome ac8() {
  Outcome out;
  Rng rng(808);
  for (std::size_t n : {4u, 128u, 1000u}) {
    std::vector<Complex> x(n);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    const auto fast = dft(x);
    const auto slow = dft_direct(x);
    const auto back = idft(fast);
    double rt = 0.0;
    double fd = 0.0;
    double scale = 0.0;
    double ex = 0.0;
    double ek = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rt = std::max(rt, std::abs(back[i] - x[i]));
      fd = std::max(fd, std::abs(fast[i] - slow[i]));
      scale = std::max(scale, std::abs(slow[i]));
      ex += std::norm(x[i]);
      ek += std::norm(fast[i]);
    }
    const double parseval = std::abs(ex - ek / static_cast<double>(n)) / ex;
    out.require(rt < 1e-9 && parseval < 1e-9 && fd < 1e-9 * std::max(1.0, scale),
                fmt::format("n={} roundtrip {:.1e} parseval {:.1e} fast-direct {:.1e}", n, rt, parseval, fd));
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ac9(const std::string& cli) {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / fmt::format("rmtfeat_ac9_{}", ::getpid());
  fs::remove_all(root);
  auto run_all = [&](const fs::path& dir, unsigned threads) {
    const std::string t = fmt::format(" --threads {}", threads);
    const std::string d = dir.string();
    const std::vector<std::string> cmds{
        "synth --seed 9 --n 16 --subjects 6 --windows 3 --delta-t 100 --strengths 1,6 --labels HC,SP --out " + d +
            "/data",
        "synth --seed 9 --ensemble rademacher --n 40 --t 200 --format csv --out " + d + "/ens",
        "mpcheck --seed 9 --input " + d + "/data --delta-t 100 --out " + d + "/mp",
        "mpcheck --seed 9 --ensemble uniform --n 40 --t 200 --out " + d + "/mpe",
        "extract --seed 9 --input " + d + "/data --delta-t 100 --test-fn vnentropy,lrt,nagao,wasserstein "
            "--stat-features --out " + d + "/feat",
        "classify --seed 9 --input " + d + "/feat/features.csv --classifier svm,knn,gnb,tree,forest "
            "--feature-set les,all --repeats 4 --trees 10 --group-by-subject --out " + d + "/cls",
        "anova --seed 9 --input " + d + "/feat/features.csv --out " + d + "/anova",
        "sweep --seed 9 --input " + d + "/data --delta-ts 50,100,150 --repeats 3 --out " + d + "/sweep",
        "train --seed 9 --input " + d + "/feat/features.csv --classifier forest --trees 10 --out " + d + "/model",
        "predict --seed 9 --input " + d + "/feat/features.csv --model " + d + "/model/model.json --out " + d +
            "/pred"};
    for (const auto& c : cmds) {
      const std::string line = cli + " " + c + t + " > /dev/null";
      if (std::system(line.c_str()) != 0) return "failed: " + c;
    }
    return std::string{};
  };
  // Same config and output directory both times; only the thread count
  // changes between the runs.
  auto snapshot = [&](const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
    return files;
  };
  const fs::path dir = root / "run";
  const auto e1 = run_all(dir, 1);
  const auto first = snapshot(dir);
  fs::remove_all(dir);
  const auto e2 = run_all(dir, 4);
  const auto second = snapshot(dir);
  out.require(e1.empty() && e2.empty(), e1.empty() ? e2.empty() ? "all commands ran" : e2 : e1);
  std::size_t same = 0;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it != second.end() && it->second == bytes) ++same;
    else out.require(false, "differs: " + name);
  }
  out.require(first.size() > 20 && same == first.size() && second.size() == first.size(),
              fmt::format("{} of {} files byte-identical across threads 1 and 4", same, first.size()));
  fs::remove_all(root);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : RMTFEAT_CLI_PATH;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 M-P law fit, three entry laws", ac1},
      {"AC2 LES law of large numbers", ac2},
      {"AC3 CLT variance", ac3},
      {"AC4 entropy bounds", ac4},
      {"AC5 eigensolver oracle", ac5},
      {"AC6 ANOVA oracle", ac6},
      {"AC7 end-to-end synthetic classification", ac7},
      {"AC8 DFT", ac8},
      {"AC9 CLI determinism", [&] { return ac9(cli); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.ok;
    std::cout << fmt::format("[{}] {} ({:.1f}s): {}", o.ok ? "PASS" : "FAIL", name, seconds_since(t0), o.detail)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
