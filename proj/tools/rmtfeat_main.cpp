#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "rmtfeat/classify.hpp"
#include "rmtfeat/error.hpp"
#include "rmtfeat/ingest.hpp"
#include "rmtfeat/linalg.hpp"
#include "rmtfeat/model_io.hpp"
#include "rmtfeat/parallel.hpp"
#include "rmtfeat/pipeline.hpp"
#include "rmtfeat/rmt.hpp"
#include "rmtfeat/rng.hpp"
#include "rmtfeat/stats.hpp"
#include "rmtfeat/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rmtfeat;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input;
  std::string out{"."};
  std::uint64_t seed{0};
  std::size_t delta_t{200};
  std::string normalization{"per-sample"};
  std::vector<std::string> test_fns{"vnentropy"};
  bool stat_features{false};
  bool normalize_les{false};
  double csv_rate{1000.0};
  unsigned threads{1};

  // classify / sweep / train
  std::vector<std::string> classifiers{"svm"};
  std::vector<std::string> feature_sets{"all"};
  std::size_t repeats{10};
  double train_frac{0.8};
  bool group_by_subject{false};
  bool shuffle_labels{false};
  double svm_c{1.0};
  double svm_gamma{0.0};
  std::size_t knn_k{5};
  std::size_t trees{50};
  std::size_t max_depth{16};
  std::vector<std::size_t> delta_ts{100, 200, 500, 1000};

  // synth / mpcheck ensembles
  std::string ensemble;
  std::size_t n{64};
  std::size_t t{1000};
  std::vector<double> strengths{1.0, 10.0};
  std::vector<std::string> labels;
  double correlation{0.0};
  double noise_floor{0.0};
  std::size_t subjects{40};
  std::size_t windows{5};
  std::string format{"bin"};
  std::size_t bins{50};

  std::string model;
};

CovNormalization parse_normalization(const std::string& s) {
  if (s == "per-sample") return CovNormalization::PerSample;
  if (s == "paper-literal") return CovNormalization::PaperLiteral;
  throw UsageError("unknown normalization '" + s + "' (per-sample, paper-literal)");
}

std::vector<TestFunction> parse_test_fns(const std::vector<std::string>& names) {
  std::vector<TestFunction> out;
  for (const auto& n : names) {
    try {
      out.push_back(TestFunction::parse(n));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("at least one --test-fn is required");
  return out;
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  write_file_atomic(dir / name, text);
}

void write_json(const fs::path& dir, const std::string& name, const json& j) {
  write_text(dir, name, j.dump(2) + "\n");
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

// Flat key=value dump of every long option the subcommand knows, threads and
// config excluded; sorted so reruns compare byte for byte.
std::string resolved_config(const CLI::App& sub) {
  std::map<std::string, std::string> kv;
  for (const CLI::Option* opt : sub.get_options()) {
    std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "threads" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
      if (opt->get_expected_max() == 0 && value.empty()) value = "true";
    } else {
      value = opt->get_default_str();
      if (opt->get_expected_max() == 0 && value.empty()) value = "false";
      if (!value.empty() && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
    }
    kv[name] = value;
  }
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

fs::path prepare_out(const Options& o) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

// Recordings for mpcheck/extract/sweep: a manifest directory, a single file,
// or a generated ensemble.
std::vector<Recording> input_recordings(const Options& o) {
  if (!o.ensemble.empty()) {
    EntryLaw law;
    try {
      law = parse_entry_law(o.ensemble);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    const auto w = gen_ensemble({law, o.n, o.t, o.seed});
    Recording rec;
    rec.data = w.data;
    for (std::size_t i = 0; i < o.n; ++i) rec.channel_names.push_back(fmt::format("ch{}", i));
    rec.subject_id = "ensemble";
    return {rec};
  }
  if (o.input.empty()) throw UsageError("--input is required");
  if (!fs::exists(o.input)) throw Error("input not found: " + o.input);
  return load_recordings(o.input, o.csv_rate);
}

FeatureTable input_table(const Options& o) {
  if (o.input.empty()) throw UsageError("--input is required");
  std::ifstream in(o.input, std::ios::binary);
  if (!in) throw Error("cannot open feature table: " + o.input);
  std::ostringstream ss;
  ss << in.rdbuf();
  return FeatureTable::from_csv(ss.str());
}

ModelSpec model_spec(const std::string& name, const Options& o) {
  ModelSpec spec;
  try {
    spec.kind = parse_model_kind(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  spec.svm.c = o.svm_c;
  spec.svm.gamma = o.svm_gamma;
  spec.knn_k = o.knn_k;
  spec.tree.max_depth = o.max_depth;
  spec.forest.n_trees = o.trees;
  spec.forest.tree.max_depth = o.max_depth;
  spec.forest.seed = derive_seed(o.seed, 0xf0);
  spec.forest.threads = 1;
  return spec;
}

std::function<bool(const std::string&)> feature_filter(const std::string& set) {
  if (set == "all") return [](const std::string&) { return true; };
  if (set == "les") return [](const std::string& c) { return c.rfind("les_", 0) == 0; };
  if (set == "stat") return [](const std::string& c) { return c.rfind("les_", 0) != 0; };
  throw UsageError("unknown feature set '" + set + "' (les, stat, all)");
}

CvOptions cv_options(const Options& o) {
  CvOptions cv;
  cv.train_frac = o.train_frac;
  cv.n_repeats = o.repeats;
  cv.seed = o.seed;
  cv.group_by_subject = o.group_by_subject;
  cv.threads = o.threads;
  return cv;
}

std::vector<std::size_t> labelled_rows(const FeatureTable& t) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (!t.rows[i].label.empty()) idx.push_back(i);
  return idx;
}

Dataset labelled_dataset(const FeatureTable& t, const std::function<bool(const std::string&)>& keep,
                         std::vector<std::string>* used, std::vector<std::string>* dropped) {
  FeatureTable lt;
  lt.columns = t.columns;
  for (std::size_t i : labelled_rows(t)) lt.rows.push_back(t.rows[i]);
  if (lt.rows.empty()) throw Error("feature table has no labelled rows");
  return lt.to_dataset(keep, used, dropped);
}

// ---- commands --------------------------------------------------------------

void cmd_synth(const Options& o, const CLI::App& sub) {
  const fs::path dir = prepare_out(o);
  const RecordingFormat fmt_kind = o.format == "csv" ? RecordingFormat::Csv : RecordingFormat::BinaryF64;
  if (o.format != "csv" && o.format != "bin") throw UsageError("--format must be csv or bin");
  const std::string ext = o.format == "csv" ? ".csv" : ".bin";
  std::vector<ManifestEntry> entries;
  if (!o.ensemble.empty()) {
    auto recs = input_recordings(o);
    save_recording(recs[0], dir / ("ensemble" + ext), fmt_kind);
    entries.push_back({"ensemble" + ext, "ensemble", "", recs[0].sample_rate_hz});
  } else {
    std::vector<std::string> labels = o.labels;
    if (labels.empty())
      for (std::size_t i = 0; i < o.strengths.size(); ++i) labels.push_back(fmt::format("c{}", i));
    if (labels.size() != o.strengths.size()) throw UsageError("--labels and --strengths differ in length");
    std::vector<ClassSpec> classes;
    for (std::size_t c = 0; c < labels.size(); ++c) {
      const std::vector<Spike> spikes{{random_unit_vector(o.n, derive_seed(o.seed, c)), o.strengths[c]}};
      classes.push_back(make_class_spec(labels[c], o.n, o.correlation, spikes, o.noise_floor));
    }
    RecordingPlan plan;
    plan.subjects_per_class = o.subjects;
    plan.windows_per_subject = o.windows;
    plan.delta_t = o.delta_t;
    plan.seed = derive_seed(o.seed, 0x5e);
    plan.threads = o.threads;
    for (const auto& rec : gen_recording(classes, plan)) {
      const std::string name = rec.subject_id + ext;
      save_recording(rec, dir / name, fmt_kind);
      entries.push_back({name, rec.subject_id, rec.label.value_or(""), rec.sample_rate_hz});
    }
  }
  write_text(dir, "manifest.csv", manifest_csv(entries));
  write_text(dir, "synth.config", resolved_config(sub));
  std::cout << fmt::format("wrote {} recordings to {}\n", entries.size(), dir.string());
}

void cmd_mpcheck(const Options& o, const CLI::App& sub) {
  auto recs = input_recordings(o);
  const std::size_t delta_t = o.ensemble.empty() ? o.delta_t : o.t;
  const std::size_t n = recs.front().n_channels();
  if (delta_t <= n)
    throw Error(fmt::format("c = N / delta_t = {} / {} must be below 1; raise --delta-t above N", n, delta_t));
  const auto norm = parse_normalization(o.normalization);
  std::vector<WindowMatrix> windows;
  for (const auto& rec : recs) {
    if (rec.n_channels() != n) throw Error("recordings differ in channel count");
    auto w = block_windows(rec, {delta_t, true});
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  std::vector<EigenSpectrum> spectra(windows.size());
  parallel_for(windows.size(), o.threads, [&](std::size_t i) { spectra[i] = window_spectrum(windows[i], norm); });
  const auto law = MPLaw::from_dimensions(n, delta_t);
  std::vector<double> all;
  std::size_t below = 0;
  std::size_t above = 0;
  std::size_t windows_above = 0;
  for (const auto& s : spectra) {
    all.insert(all.end(), s.eigenvalues.begin(), s.eigenvalues.end());
    bool any = false;
    for (double v : s.eigenvalues) {
      below += v < law.a;
      above += v > law.b;
      any |= v > law.b;
    }
    windows_above += any;
  }
  std::sort(all.begin(), all.end());
  const double ks = esd_ks_distance(all, law);

  const fs::path dir = prepare_out(o);
  const double lo = std::min(law.a, all.front());
  const double hi = std::max(law.b, all.back());
  const double width = (hi - lo) / static_cast<double>(o.bins);
  std::vector<std::size_t> counts(o.bins, 0);
  for (double v : all) counts[std::min(o.bins - 1, static_cast<std::size_t>((v - lo) / width))]++;
  std::string hist = "bin_lo,bin_hi,count,density\n";
  for (std::size_t i = 0; i < o.bins; ++i) {
    const double d = static_cast<double>(counts[i]) / (static_cast<double>(all.size()) * width);
    hist += fmt::format("{},{},{},{}\n", num(lo + i * width), num(lo + (i + 1) * width), counts[i], num(d));
  }
  std::string dens = "lambda,density\n";
  for (std::size_t i = 0; i <= 400; ++i) {
    const double x = law.a + (law.b - law.a) * static_cast<double>(i) / 400.0;
    dens += fmt::format("{},{}\n", num(x), num(mp_density(law, x)));
  }
  json report{{"n", n},
              {"delta_t", delta_t},
              {"c", law.c},
              {"a", law.a},
              {"b", law.b},
              {"normalization", o.normalization},
              {"windows", spectra.size()},
              {"eigenvalues", all.size()},
              {"ks_distance", ks},
              {"below_a", below},
              {"above_b", above},
              {"windows_with_eigenvalue_above_b", windows_above},
              {"largest_eigenvalue", all.back()}};
  write_text(dir, "histogram.csv", hist);
  write_text(dir, "density.csv", dens);
  write_json(dir, "mpcheck.json", report);
  write_text(dir, "mpcheck.config", resolved_config(sub));
  std::cout << fmt::format("c={} windows={} ks={:.6f} above_b={} below_a={}\n", law.c, spectra.size(), ks, above,
                           below);
}

void cmd_extract(const Options& o, const CLI::App& sub) {
  const auto recs = input_recordings(o);
  if (auto warn = window_size_warning({o.delta_t, true})) std::cerr << "warning: " << *warn << "\n";
  ExtractOptions eo;
  eo.delta_t = o.delta_t;
  eo.normalization = parse_normalization(o.normalization);
  eo.test_functions = parse_test_fns(o.test_fns);
  eo.normalize_les = o.normalize_les;
  eo.stat_features = o.stat_features;
  eo.threads = o.threads;
  const auto table = extract_features(recs, eo);
  const fs::path dir = prepare_out(o);
  write_text(dir, "features.csv", table.to_csv());
  write_text(dir, "extract.config", resolved_config(sub));
  std::cout << fmt::format("{} windows x {} features\n", table.rows.size(), table.columns.size());
}

void cmd_classify(const Options& o, const CLI::App& sub) {
  const auto table = input_table(o);
  json results = json::array();
  std::string text = fmt::format("{:<10} {:<8} {:>8} {:>20}\n", "classifier", "features", "columns", "accuracy (%)");
  for (const auto& set : o.feature_sets) {
    std::vector<std::string> used;
    std::vector<std::string> dropped;
    Dataset ds = labelled_dataset(table, feature_filter(set), &used, &dropped);
    if (used.empty()) throw Error("feature set '" + set + "' has no usable columns");
    if (o.shuffle_labels) ds = permute_labels(ds, derive_seed(o.seed, 0x5f));
    for (const auto& name : o.classifiers) {
      const auto spec = model_spec(name, o);
      const auto r = cross_validate(ds, spec, cv_options(o));
      json fold = json::array();
      for (double a : r.per_fold) fold.push_back(a);
      results.push_back({{"classifier", model_kind_name(spec.kind)},
                         {"feature_set", set},
                         {"columns", used},
                         {"dropped_columns", dropped},
                         {"rows", ds.size()},
                         {"mean_accuracy", r.mean_accuracy},
                         {"std_accuracy", jnum(r.std_accuracy)},
                         {"n_repeats", r.n_repeats},
                         {"per_repeat", fold},
                         {"classes", r.classes},
                         {"confusion", r.confusion},
                         {"grouped_by_subject", r.grouped_by_subject},
                         {"stratified", r.stratified},
                         {"shuffled_labels", o.shuffle_labels}});
      text += fmt::format("{:<10} {:<8} {:>8} {:>12.2f} +/- {:.2f}\n", model_kind_name(spec.kind), set, used.size(),
                          100.0 * r.mean_accuracy, 100.0 * r.std_accuracy);
      text += "  confusion [true][pred] over " + fmt::format("{}", fmt::join(r.classes, " ")) + "\n";
      for (std::size_t i = 0; i < r.confusion.size(); ++i)
        text += fmt::format("    {:<8} {}\n", r.classes[i], fmt::join(r.confusion[i], " "));
    }
  }
  const fs::path dir = prepare_out(o);
  write_json(dir, "cv_report.json", {{"results", results}});
  write_text(dir, "cv_table.txt", text);
  write_text(dir, "classify.config", resolved_config(sub));
  std::cout << text;
}

void cmd_anova(const Options& o, const CLI::App& sub) {
  auto table = input_table(o);
  if (o.group_by_subject) table = table.aggregate_by_subject();
  const auto rows = labelled_rows(table);
  std::vector<std::string> groups;
  for (std::size_t i : rows) groups.push_back(table.rows[i].label);
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  if (groups.size() < 2) throw Error("anova needs at least two labelled groups");
  // pooled test first, then every pair
  std::vector<std::vector<std::string>> tests{groups};
  for (std::size_t a = 0; a < groups.size(); ++a)
    for (std::size_t b = a + 1; b < groups.size(); ++b) tests.push_back({groups[a], groups[b]});

  std::string csv = "feature,groups,f,df_between,df_within,p_value,significant\n";
  json out = json::array();
  std::vector<std::string> skipped;
  for (std::size_t col = 0; col < table.columns.size(); ++col) {
    bool finite = true;
    for (std::size_t i : rows) finite &= std::isfinite(table.rows[i].values[col]);
    if (!finite) {
      skipped.push_back(table.columns[col]);
      continue;
    }
    json per = json::array();
    for (std::size_t ti = 0; ti < tests.size(); ++ti) {
      const auto& test = tests[ti];
      std::vector<std::vector<double>> samples(test.size());
      for (std::size_t i : rows) {
        const auto it = std::find(test.begin(), test.end(), table.rows[i].label);
        if (it != test.end()) samples[static_cast<std::size_t>(it - test.begin())].push_back(table.rows[i].values[col]);
      }
      const std::string name = ti == 0 ? "ALL" : fmt::format("{}", fmt::join(test, "-"));
      const auto r = anova_oneway(samples);
      csv += fmt::format("{},{},{},{},{},{},{}\n", table.columns[col], name, num(r.f_statistic), r.df_between,
                         r.df_within, num(r.p_value), r.p_value < 0.05 ? "yes" : "no");
      per.push_back({{"groups", name},
                     {"f", jnum(r.f_statistic)},
                     {"df_between", r.df_between},
                     {"df_within", r.df_within},
                     {"p_value", r.p_value},
                     {"group_means", r.group_means},
                     {"zero_within_variance", r.zero_within_variance}});
    }
    out.push_back({{"feature", table.columns[col]}, {"tests", per}});
  }
  const fs::path dir = prepare_out(o);
  write_text(dir, "anova.csv", csv);
  write_json(dir, "anova.json",
             {{"groups", groups}, {"grouped_by_subject", o.group_by_subject}, {"features", out},
              {"skipped_non_finite", skipped}, {"alpha", 0.05}});
  write_text(dir, "anova.config", resolved_config(sub));
  std::cout << csv;
}

void cmd_sweep(const Options& o, const CLI::App& sub) {
  const auto recs = input_recordings(o);
  std::size_t t_min = recs.front().n_samples();
  for (const auto& r : recs) t_min = std::min(t_min, r.n_samples());
  const auto spec = model_spec(o.classifiers.front(), o);
  ExtractOptions eo;
  eo.normalization = parse_normalization(o.normalization);
  eo.test_functions = parse_test_fns(o.test_fns);
  eo.normalize_les = o.normalize_les;
  eo.stat_features = o.stat_features;
  eo.threads = o.threads;
  std::vector<double> means;
  json rows = json::array();
  std::string csv = "delta_t,L,windows,mean_accuracy,std_accuracy,best\n";
  std::vector<std::string> lines;
  for (std::size_t dt : o.delta_ts) {
    if (dt > t_min) throw Error(fmt::format("delta_t {} exceeds the shortest recording ({} samples)", dt, t_min));
    eo.delta_t = dt;
    const auto table = extract_features(recs, eo);
    const Dataset ds = labelled_dataset(table, feature_filter("all"), nullptr, nullptr);
    const auto r = cross_validate(ds, spec, cv_options(o));
    means.push_back(r.mean_accuracy);
    rows.push_back({{"delta_t", dt},
                    {"L", t_min / dt},
                    {"windows", ds.size()},
                    {"mean_accuracy", r.mean_accuracy},
                    {"std_accuracy", jnum(r.std_accuracy)}});
  }
  const std::size_t best =
      static_cast<std::size_t>(std::max_element(means.begin(), means.end()) - means.begin());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i]["best"] = i == best;
    csv += fmt::format("{},{},{},{},{},{}\n", o.delta_ts[i], t_min / o.delta_ts[i], rows[i]["windows"].get<std::size_t>(),
                       num(means[i]), num(rows[i]["std_accuracy"].is_number() ? rows[i]["std_accuracy"].get<double>()
                                                                               : std::nan("")),
                       i == best ? "yes" : "no");
  }
  const fs::path dir = prepare_out(o);
  write_text(dir, "sweep.csv", csv);
  write_json(dir, "sweep.json",
             {{"classifier", model_kind_name(spec.kind)},
              {"rows", rows},
              {"best_delta_t", o.delta_ts[best]},
              {"note", "Reference point: delta_t = 200 is the usual optimum reported for 64-channel clinical EEG. "
                       "Context only; it is not expected to carry over to other data."}});
  write_text(dir, "sweep.config", resolved_config(sub));
  std::cout << csv;
}

void cmd_train(const Options& o, const CLI::App& sub) {
  const auto table = input_table(o);
  std::vector<std::string> used;
  const Dataset ds = labelled_dataset(table, feature_filter(o.feature_sets.front()), &used, nullptr);
  const auto scaler = FeatureScaler::fit(ds);
  const auto spec = model_spec(o.classifiers.front(), o);
  const ModelDocument doc{train(scaler.apply(ds), spec), used, scaler};
  const fs::path dir = prepare_out(o);
  write_json(dir, "model.json", model_to_json(doc));
  write_text(dir, "train.config", resolved_config(sub));
  std::cout << fmt::format("trained {} on {} rows x {} features\n", model_kind_name(spec.kind), ds.size(), used.size());
}

void cmd_predict(const Options& o, const CLI::App& sub) {
  std::ifstream in(o.model, std::ios::binary);
  if (!in) throw Error("cannot open model: " + o.model);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(std::string("model file is not valid JSON: ") + e.what());
  }
  const auto doc = model_from_json(j);
  const auto table = input_table(o);
  std::vector<std::size_t> cols;
  for (const auto& name : doc.feature_names) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), name);
    if (it == table.columns.end()) throw Error("feature table lacks column " + name);
    cols.push_back(static_cast<std::size_t>(it - table.columns.begin()));
  }
  std::string csv = "subject_id,label,window_index,predicted\n";
  std::size_t correct = 0;
  std::size_t labelled = 0;
  for (const auto& row : table.rows) {
    std::vector<double> x;
    for (std::size_t c : cols) x.push_back(row.values[c]);
    if (doc.scaler) x = doc.scaler->apply(x);
    const auto pred = doc.model.predict(x);
    csv += fmt::format("{},{},{},{}\n", row.subject_id, row.label, row.window_index, pred);
    if (!row.label.empty()) {
      ++labelled;
      correct += pred == row.label;
    }
  }
  const fs::path dir = prepare_out(o);
  write_text(dir, "predictions.csv", csv);
  write_text(dir, "predict.config", resolved_config(sub));
  if (labelled > 0) std::cout << fmt::format("accuracy {:.4f} on {} labelled rows\n",
                                             static_cast<double>(correct) / labelled, labelled);
}

// ---- option wiring ---------------------------------------------------------

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--seed", o.seed, "master seed")->required();
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--threads", o.threads, "worker threads (results do not depend on it)")->check(CLI::Range(1u, 256u));
}

void add_recording_input(CLI::App* sub, Options& o) {
  sub->add_option("--input", o.input, "recording file or directory with manifest.csv");
  sub->add_option("--csv-rate", o.csv_rate, "sample rate for CSV input without a manifest");
  sub->add_option("--delta-t", o.delta_t, "window length in samples");
  sub->add_option("--normalization", o.normalization, "per-sample or paper-literal")
      ->check(CLI::IsMember({"per-sample", "paper-literal"}));
}

void add_les(CLI::App* sub, Options& o) {
  sub->add_option("--test-fn", o.test_fns, "lrt, wasserstein, nagao, vnentropy")->delimiter(',');
  sub->add_flag("--stat-features", o.stat_features, "append the 7 per-channel statistics");
  sub->add_flag("--normalize-les", o.normalize_les, "divide each LES by N");
}

void add_model(CLI::App* sub, Options& o) {
  sub->add_option("--classifier", o.classifiers, "svm, knn, gnb, tree, forest")->delimiter(',');
  sub->add_option("--svm-c", o.svm_c, "SVM box constraint");
  sub->add_option("--svm-gamma", o.svm_gamma, "RBF gamma, 0 = 1/dim");
  sub->add_option("--knn-k", o.knn_k, "neighbours for knn");
  sub->add_option("--trees", o.trees, "forest size");
  sub->add_option("--max-depth", o.max_depth, "tree depth limit");
}

void add_cv(CLI::App* sub, Options& o) {
  sub->add_option("--repeats", o.repeats, "random train/test splits");
  sub->add_option("--train-frac", o.train_frac, "training fraction per split");
  sub->add_flag("--group-by-subject", o.group_by_subject, "keep each subject on one side of a split");
}

void add_ensemble(CLI::App* sub, Options& o) {
  sub->add_option("--ensemble", o.ensemble, "gaussian, rademacher or uniform");
  sub->add_option("--n", o.n, "channels");
  sub->add_option("--t", o.t, "samples for an ensemble");
}

// Flat key=value lines become --key=value arguments for keys not already on
// the command line.
std::vector<std::string> config_args(const std::vector<std::string>& argv) {
  std::string path;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
    else if (argv[i].rfind("--config=", 0) == 0) path = argv[i].substr(9);
  }
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("{}:{}: expected key=value", path, lineno));
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "threads" || key == "config") continue;
    bool on_cli = false;
    for (const auto& a : argv) on_cli |= a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
    if (on_cli) continue;
    if (value == "true") out.push_back("--" + key);
    else if (value == "false") continue;
    else out.push_back("--" + key + "=" + value);
  }
  return out;
}

void error_line(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Random-matrix features for multichannel recordings"};
  app.require_subcommand(1);
  std::string config_path;

  auto* synth = app.add_subcommand("synth", "generate spiked-covariance recordings or a white ensemble");
  add_common(synth, o);
  add_ensemble(synth, o);
  synth->add_option("--strengths", o.strengths, "spike strength per class")->delimiter(',');
  synth->add_option("--labels", o.labels, "class labels")->delimiter(',');
  synth->add_option("--correlation", o.correlation, "common channel correlation");
  synth->add_option("--noise-floor", o.noise_floor, "extra white-noise variance");
  synth->add_option("--subjects", o.subjects, "subjects per class");
  synth->add_option("--windows", o.windows, "windows per subject");
  synth->add_option("--delta-t", o.delta_t, "window length in samples");
  synth->add_option("--format", o.format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));

  auto* mpcheck = app.add_subcommand("mpcheck", "compare window spectra with the Marchenko-Pastur law");
  add_common(mpcheck, o);
  add_recording_input(mpcheck, o);
  add_ensemble(mpcheck, o);
  mpcheck->add_option("--bins", o.bins, "histogram bins")->check(CLI::Range(1u, 100000u));

  auto* extract = app.add_subcommand("extract", "per-window LES and statistical features");
  add_common(extract, o);
  add_recording_input(extract, o);
  add_les(extract, o);

  auto* classify = app.add_subcommand("classify", "repeated random-split cross-validation");
  add_common(classify, o);
  classify->add_option("--input", o.input, "feature table from extract");
  classify->add_option("--feature-set", o.feature_sets, "les, stat or all")->delimiter(',');
  classify->add_flag("--shuffle-labels", o.shuffle_labels, "permutation control");
  add_model(classify, o);
  add_cv(classify, o);

  auto* anova = app.add_subcommand("anova", "one-way ANOVA per feature, pooled and pairwise");
  add_common(anova, o);
  anova->add_option("--input", o.input, "feature table from extract");
  anova->add_flag("--group-by-subject", o.group_by_subject, "average windows per subject first");

  auto* sweep = app.add_subcommand("sweep", "accuracy as a function of the window length");
  add_common(sweep, o);
  add_recording_input(sweep, o);
  add_les(sweep, o);
  add_model(sweep, o);
  add_cv(sweep, o);
  sweep->add_option("--delta-ts", o.delta_ts, "window lengths")->delimiter(',');

  auto* trainc = app.add_subcommand("train", "fit one classifier on a feature table");
  add_common(trainc, o);
  trainc->add_option("--input", o.input, "feature table from extract");
  trainc->add_option("--feature-set", o.feature_sets, "les, stat or all")->delimiter(',');
  add_model(trainc, o);

  auto* predict = app.add_subcommand("predict", "apply a trained model to a feature table");
  add_common(predict, o);
  predict->add_option("--input", o.input, "feature table from extract");
  predict->add_option("--model", o.model, "model.json from train")->required();

  for (auto* sub : {synth, mpcheck, extract, classify, anova, sweep, trainc, predict}) {
    sub->add_option("--config", config_path, "flat key=value file; command-line flags win");
    for (auto* opt : sub->get_options()) const_cast<CLI::Option*>(opt)->capture_default_str();
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const auto extra = config_args(args);
    args.insert(args.end(), extra.begin(), extra.end());
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("usage", e.what());
    return 1;
  } catch (const UsageError& e) {
    error_line("usage", e.what());
    return 1;
  }

  try {
    const std::vector<std::pair<CLI::App*, void (*)(const Options&, const CLI::App&)>> table{
        {synth, cmd_synth},     {mpcheck, cmd_mpcheck}, {extract, cmd_extract}, {classify, cmd_classify},
        {anova, cmd_anova},     {sweep, cmd_sweep},     {trainc, cmd_train},    {predict, cmd_predict}};
    for (const auto& [sub, fn] : table)
      if (sub->parsed()) fn(o, *sub);
  } catch (const UsageError& e) {
    error_line("usage", e.what());
    return 1;
  } catch (const std::exception& e) {
    error_line("data", e.what());
    return 2;
  }
  return 0;
}
