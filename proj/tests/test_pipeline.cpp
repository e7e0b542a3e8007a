#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rmtfeat/error.hpp"
#include "rmtfeat/ingest.hpp"
#include "rmtfeat/pipeline.hpp"
#include "rmtfeat/synth.hpp"
#include "test_support.hpp"

using namespace rmtfeat;

namespace {

std::vector<Recording> small_recordings() {
  const std::vector<std::string> labels{"a", "b"};
  const std::vector<double> strengths{1.0, 6.0};
  RecordingPlan plan;
  plan.subjects_per_class = 2;
  plan.windows_per_subject = 3;
  plan.delta_t = 40;
  plan.seed = 4;
  return gen_recording(spiked_classes(8, labels, strengths, 1), plan);
}

}  // namespace

TEST_CASE("extract_features rows and columns") {
  const auto recs = small_recordings();
  ExtractOptions o;
  o.delta_t = 40;
  o.test_functions = {TestFunction::von_neumann_entropy(), TestFunction::lrt()};
  o.stat_features = true;
  const auto t = extract_features(recs, o);
  CHECK(t.rows.size() == 12);
  REQUIRE(t.columns.size() == 2 + 7 * 8);
  CHECK(t.columns[0] == "les_vnentropy");
  CHECK(t.columns[2] == "ch0_hmean");
  for (const auto& r : t.rows) {
    CHECK(r.values[0] >= 0.0);
    CHECK(r.values[0] <= std::log(8.0) + 1e-12);
  }
  CHECK(t.rows[3].subject_id == "a_001");
  CHECK(t.rows[3].window_index == 0);
  o.threads = 4;
  const auto again = extract_features(recs, o);
  CHECK(again.to_csv() == t.to_csv());
}

TEST_CASE("feature table csv round trip, aggregation and dataset view") {
  const auto recs = small_recordings();
  ExtractOptions o;
  o.delta_t = 40;
  o.test_functions = {TestFunction::nagao()};
  o.stat_features = true;
  const auto t = extract_features(recs, o);
  const auto csv = t.to_csv();
  const auto back = FeatureTable::from_csv(csv);
  CHECK(back.to_csv() == csv);
  CHECK(back.columns == t.columns);

  const auto agg = t.aggregate_by_subject();
  CHECK(agg.rows.size() == 4);
  double mean = 0.0;
  for (std::size_t i = 0; i < 3; ++i) mean += t.rows[i].values[0];
  CHECK(agg.rows[0].values[0] == doctest::Approx(mean / 3.0));

  std::vector<std::string> used;
  std::vector<std::string> dropped;
  const auto ds = t.to_dataset([](const std::string&) { return true; }, &used, &dropped);
  CHECK(ds.size() == 12);
  CHECK(ds.dim() == used.size());
  CHECK(used.size() + dropped.size() == t.columns.size());
  // Gaussian channels change sign, so every harmonic mean is undefined.
  for (std::size_t ch = 0; ch < 8; ++ch)
    CHECK(std::find(dropped.begin(), dropped.end(), "ch" + std::to_string(ch) + "_hmean") != dropped.end());
  CHECK(ds.group_keys[0] == "a_000");
}

TEST_CASE("manifest loading") {
  testing::TempDir dir("manifest");
  const auto recs = small_recordings();
  std::vector<ManifestEntry> entries;
  for (const auto& r : recs) {
    const std::string name = r.subject_id + (entries.size() % 2 == 0 ? ".csv" : ".bin");
    save_recording(r, dir.path() / name, format_for_path(name));
    entries.push_back({name, r.subject_id, *r.label, 1000.0});
  }
  write_file_atomic(dir.path() / "manifest.csv", manifest_csv(entries));
  const auto loaded = load_recordings(dir.path());
  REQUIRE(loaded.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(loaded[i].subject_id == recs[i].subject_id);
    CHECK(loaded[i].label == recs[i].label);
    CHECK(loaded[i].data == recs[i].data);
  }
  const auto single = load_recordings(dir.path() / entries[0].path);
  REQUIRE(single.size() == 1);
  CHECK(!single[0].label.has_value());

  std::ofstream(dir.path() / "bad.csv") << "path,label\n";
  CHECK_THROWS_AS(read_manifest(dir.path() / "bad.csv"), Error);
}
