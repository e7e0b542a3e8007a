#include <doctest.h>

#include <fstream>

#include "rmtfeat/error.hpp"
#include "rmtfeat/ingest.hpp"
#include "rmtfeat/rng.hpp"
#include "test_support.hpp"

using namespace rmtfeat;

namespace {

Recording ramp_recording(std::size_t n, std::size_t t) {
  Recording rec;
  rec.data = Matrix(n, t);
  for (std::size_t r = 0; r < n; ++r) {
    rec.channel_names.push_back("c" + std::to_string(r));
    for (std::size_t c = 0; c < t; ++c) rec.data(r, c) = static_cast<double>(r * 1000 + c);
  }
  rec.subject_id = "s1";
  return rec;
}

void write(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("load_recording parses a 3-channel 10-sample CSV") {
  testing::TempDir dir("csv");
  const auto p = dir.path() / "rec.csv";
  write(p,
        "Fz,Cz,Pz\n"
        "1,2,3,4,5,6,7,8,9,10\n"
        "0.5,-1,2e-3,4,5,6,7,8,9,10\n"
        "1,1,1,1,1,1,1,1,1,2.5\n");
  const Recording rec = load_recording(p, RecordingFormat::Csv, 250.0);
  CHECK(rec.n_channels() == 3);
  CHECK(rec.n_samples() == 10);
  CHECK(rec.channel_names == std::vector<std::string>{"Fz", "Cz", "Pz"});
  CHECK(rec.data(1, 2) == 2e-3);
  CHECK(rec.sample_rate_hz == 250.0);
  CHECK(rec.subject_id == "rec");
}

TEST_CASE("a NaN in the body is reported with its position") {
  testing::TempDir dir("nan");
  const auto p = dir.path() / "rec.csv";
  write(p,
        "a,b,c\n"
        "1,2,3,4,5,6\n"
        "1,2,3,4,5,6\n"
        "1,2,3,4,5,nan\n");
  try {
    load_recording(p, RecordingFormat::Csv);
    FAIL("expected NonFiniteValue");
  } catch (const NonFiniteValue& e) {
    CHECK(e.row() == 2);
    CHECK(e.col() == 5);
    CHECK(std::string(e.what()).find("(2,5)") != std::string::npos);
  }
}

TEST_CASE("CSV validation errors") {
  testing::TempDir dir("bad");
  SUBCASE("header and body disagree on channel count") {
    write(dir.path() / "x.csv", "a,b,c\n1,2,3,4\n1,2,3,4\n");
    CHECK_THROWS_AS(load_recording(dir.path() / "x.csv", RecordingFormat::Csv), Error);
  }
  SUBCASE("ragged rows") {
    write(dir.path() / "x.csv", "a,b\n1,2,3\n1,2\n");
    CHECK_THROWS_AS(load_recording(dir.path() / "x.csv", RecordingFormat::Csv), Error);
  }
  SUBCASE("single channel") {
    write(dir.path() / "x.csv", "a\n1,2,3\n");
    CHECK_THROWS_AS(load_recording(dir.path() / "x.csv", RecordingFormat::Csv), Error);
  }
  SUBCASE("fewer samples than channels") {
    write(dir.path() / "x.csv", "a,b,c\n1,2\n1,2\n1,2\n");
    CHECK_THROWS_AS(load_recording(dir.path() / "x.csv", RecordingFormat::Csv), Error);
  }
}

TEST_CASE("binary header and body sizes are checked") {
  testing::TempDir dir("binbad");
  const auto p = dir.path() / "r.bin";
  save_recording(ramp_recording(3, 8), p, RecordingFormat::BinaryF64);
  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(bytes.size() == 32 + 3 * 8 * 8);
  CHECK(bytes.substr(0, 4) == "RMTS");
  write(p, bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_recording(p, RecordingFormat::BinaryF64), Error);
  write(p, "XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_recording(p, RecordingFormat::BinaryF64), Error);
}

TEST_CASE("save then load is the identity for both formats") {
  testing::TempDir dir("rt");
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    Recording rec = ramp_recording(4, 37);
    for (double& v : rec.data.values()) v = rng.normal() * std::pow(10.0, rng.uniform() * 12.0 - 6.0);
    rec.sample_rate_hz = 512.0;
    for (auto fmt : {RecordingFormat::Csv, RecordingFormat::BinaryF64}) {
      const auto p = dir.path() / (fmt == RecordingFormat::Csv ? "r.csv" : "r.bin");
      save_recording(rec, p, fmt);
      const Recording back = load_recording(p, fmt, 512.0);
      CHECK(back.data == rec.data);
      CHECK(back.sample_rate_hz == 512.0);
      if (fmt == RecordingFormat::Csv) CHECK(back.channel_names == rec.channel_names);
    }
  }
}

TEST_CASE("block_windows counts and coverage") {
  SUBCASE("T=10, dT=10 gives the whole recording") {
    const Recording rec = ramp_recording(3, 10);
    const auto w = block_windows(rec, {10, true});
    REQUIRE(w.size() == 1);
    CHECK(w[0].data == rec.data);
  }
  SUBCASE("T=10, dT=4 drops samples 8-9") {
    const Recording rec = ramp_recording(2, 10);
    const auto w = block_windows(rec, {4, true});
    REQUIRE(w.size() == 2);
    CHECK(w[1].data(0, 0) == 4.0);
    CHECK(w[1].data(0, 3) == 7.0);
    const auto kept = block_windows(rec, {4, false});
    REQUIRE(kept.size() == 3);
    CHECK(kept[2].data.cols() == 2);
  }
  SUBCASE("T=300000, dT=200 gives 1500 windows") {
    Recording rec;
    rec.data = Matrix(2, 300000, 1.0);
    rec.channel_names = {"a", "b"};
    CHECK(block_windows(rec, {200, true}).size() == 1500);
  }
  SUBCASE("dT > T is an error") {
    CHECK_THROWS_AS(block_windows(ramp_recording(2, 10), {11, true}), Error);
    CHECK_THROWS_AS(block_windows(ramp_recording(2, 10), {1, true}), Error);
  }
}

TEST_CASE("property: windows are disjoint and concatenate to the first L*dT columns") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    const std::size_t t = n + rng.below(200);
    const std::size_t dt = 2 + rng.below(t - 1);
    const Recording rec = ramp_recording(n, t);
    const auto windows = block_windows(rec, {dt, true});
    REQUIRE(windows.size() == t / dt);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      CHECK(windows[i].window_index == i);
      CHECK(windows[i].data == rec.data.column_block(i * dt, dt));
    }
  }
}

TEST_CASE("window size warning outside 150-500") {
  CHECK(window_size_warning({200, true}) == std::nullopt);
  CHECK(window_size_warning({100, true}).has_value());
  CHECK(window_size_warning({1000, true}).has_value());
}
