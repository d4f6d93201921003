#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "gtest/gtest.h"
#include "seizure/eeg_data.hpp"
#include "seizure/interpret.hpp"

namespace seizure::eeg {
namespace {

namespace fs = std::filesystem;

EegRecord constant_record(size_t n, size_t onset, double value = 0.0) {
  EegRecord r;
  r.patient_id = "P";
  r.record_id = "R";
  r.samples.assign(n * kNumChannels, value);
  r.onset_sample = onset;
  return r;
}

class CsvFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "seizure_eeg_test";
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path write_csv(const std::string& name, size_t rows, const std::string& bad_cell = "") {
    const fs::path p = dir_ / name;
    std::ofstream out(p);
    for (size_t i = 0; i < rows; ++i) {
      if (!bad_cell.empty() && i == 3) {
        out << "1," << bad_cell << ",3,4\n";
      } else {
        out << i % 7 << ",1.5,-2,0.25\n";
      }
    }
    return p;
  }
  fs::path dir_;
};

TEST_F(CsvFixture, LoadsAThreeMinuteRecord) {
  const auto p = write_csv("a.csv", 46080);
  const auto rec = load_record({"P1", "a.csv", 256, 30720}, p);
  EXPECT_EQ(rec.n_samples(), 46080u);
  EXPECT_EQ(rec.channels[0], "F7-T7");
  EXPECT_DOUBLE_EQ(rec.at(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(rec.at(1, 3), 0.25);
  const auto parts = partition(rec);
  EXPECT_FALSE(parts.available(Part::kExtendedInterictal));
  EXPECT_TRUE(parts.available(Part::kInterictal));
  EXPECT_TRUE(parts.available(Part::kPreictal));
  EXPECT_TRUE(parts.available(Part::kIctal));
}

TEST_F(CsvFixture, KeepsNativeRateUntilResampled) {
  const auto p = write_csv("b.csv", 92160);
  const auto rec = load_record({"P1", "b.csv", 512, 61440}, p);
  EXPECT_EQ(rec.fs, 512);
  EXPECT_EQ(rec.n_samples(), 92160u);
}

TEST_F(CsvFixture, RejectsBadInput) {
  // Onset 1000 samples (3.9 s) before the end of the file.
  const auto p = write_csv("c.csv", 2000);
  try {
    load_record({"P1", "c.csv", 256, 1000}, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient ictal duration"), std::string::npos);
  }
  EXPECT_THROW(load_record({"P1", "c.csv", 300, 100}, p), Error);
  const auto bad = write_csv("d.csv", 20000, "x1");
  try {
    load_record({"P1", "d.csv", 256, 100}, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
  std::ofstream(dir_ / "e.csv") << "1,2,3\n";
  EXPECT_THROW(load_record({"P1", "e.csv", 256, 0}, dir_ / "e.csv"), Error);
}

TEST(ManifestTest, ParsesEntries) {
  const auto m = parse_manifest(R"([{"patient_id":"A","file":"a.csv","fs":512,"onset_sample":10}])");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].patient_id, "A");
  EXPECT_EQ(m[0].fs, 512);
  EXPECT_EQ(m[0].onset_sample, 10u);
  EXPECT_THROW(parse_manifest("{"), Error);
  EXPECT_THROW(parse_manifest(R"([{"file":"a.csv"}])"), Error);
}

TEST(ResampleTest, IdentityAt256) {
  auto r = constant_record(2000, 0, 3.0);
  r.samples[17] = -1.25;
  const auto out = resample_to_256(r);
  EXPECT_EQ(out.samples, r.samples);
  EXPECT_EQ(out.onset_sample, r.onset_sample);
}

EegRecord sinusoid(int fs, double hz, size_t n) {
  EegRecord r;
  r.fs = fs;
  r.samples.resize(n * kNumChannels);
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < kNumChannels; ++c) {
      r.samples[i * kNumChannels + c] = std::sin(2.0 * std::numbers::pi * hz * i / fs + 0.3 * c);
    }
  }
  return r;
}

TEST(ResampleTest, TenHzSurvivesDecimation) {
  auto r = sinusoid(512, 10.0, 8192);
  r.onset_sample = 1001;
  const auto out = resample_to_256(r);
  EXPECT_EQ(out.fs, 256);
  EXPECT_EQ(out.n_samples(), 4096u);
  EXPECT_EQ(out.onset_sample, 500u);
  double worst = 0.0;
  for (size_t i = 64; i + 64 < out.n_samples(); ++i) {
    for (size_t c = 0; c < kNumChannels; ++c) {
      const double want = std::sin(2.0 * std::numbers::pi * 10.0 * i / 256.0 + 0.3 * c);
      worst = std::max(worst, std::abs(out.at(i, c) - want));
    }
  }
  EXPECT_LT(worst, 0.01);
}

TEST(ResampleTest, OneHundredTwentyHzIsRemoved) {
  const auto r = sinusoid(1024, 120.0, 16384);
  const auto out = resample_to_256(r);
  EXPECT_EQ(out.n_samples(), 4096u);
  // Skip the filter's half-length at each end, where mirror padding leaks.
  const size_t edge = decimation_filter(1024).size() / 8 + 1;
  double in_ss = 0.0, out_ss = 0.0;
  for (double v : r.samples) in_ss += v * v;
  for (size_t i = edge * kNumChannels; i < out.samples.size() - edge * kNumChannels; ++i) {
    out_ss += out.samples[i] * out.samples[i];
  }
  const double in_rms = std::sqrt(in_ss / r.samples.size());
  const double out_rms = std::sqrt(out_ss / (out.samples.size() - 2 * edge * kNumChannels));
  EXPECT_LT(out_rms, 0.05 * in_rms);
}

TEST(ResampleTest, OddLengthRoundsUp) {
  auto r = sinusoid(512, 5.0, 1001);
  EXPECT_EQ(resample_to_256(r).n_samples(), 501u);
  r.fs = 300;
  EXPECT_THROW(resample_to_256(r), Error);
}

TEST(PartitionTest, Placement) {
  auto parts = partition(constant_record(46080 + 15360, 46080));
  for (auto p : kAllParts) EXPECT_TRUE(parts.available(p));
  EXPECT_EQ(parts[Part::kExtendedInterictal]->begin, 0u);

  parts = partition(constant_record(30720 + 15360, 30720));
  EXPECT_FALSE(parts.available(Part::kExtendedInterictal));
  EXPECT_TRUE(parts.available(Part::kInterictal));

  parts = partition(constant_record(50000 + 15360, 50000));
  EXPECT_EQ(*parts[Part::kExtendedInterictal], (SampleRange{3920, 19280}));
}

TEST(PartitionTest, TilesFourMinutesAroundOnset) {
  for (size_t onset : {46080u, 50000u, 123457u}) {
    const auto parts = partition(constant_record(onset + 20000, onset));
    size_t cursor = onset - 46080;
    for (auto p : kAllParts) {
      ASSERT_TRUE(parts.available(p));
      EXPECT_EQ(parts[p]->begin, cursor);
      EXPECT_EQ(parts[p]->size(), kPartLen);
      cursor = parts[p]->end;
    }
    EXPECT_EQ(cursor, onset + 15360);
  }
}

TEST(WindowTest, CountsAndOffsets) {
  EXPECT_EQ(window_count(15360), 23u);
  EXPECT_EQ(window_count(1920), 2u);
  EXPECT_EQ(window_count(1279), 0u);
  const auto rec = constant_record(4000, 0, 42.0);
  const auto w = windows(rec, Part::kPreictal, {100, 2020}, true);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].start, 100u);
  EXPECT_EQ(w[1].start, 740u);
  EXPECT_EQ(w[0].label, Label::kUnlabeled);
  for (double v : w[0].data) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(windows(rec, Part::kIctal, {0, 1000}, true), Error);
}

TEST(WindowTest, LabelsFollowParts) {
  const auto rec = constant_record(3000, 0);
  EXPECT_EQ(windows(rec, Part::kIctal, {0, 1280}, true)[0].label, Label::kIctal);
  EXPECT_EQ(windows(rec, Part::kInterictal, {0, 1280}, true)[0].label, Label::kInterictal);
  EXPECT_EQ(windows(rec, Part::kIctal, {0, 1280}, false)[0].label, Label::kUnlabeled);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TEST(WindowTest, EveryChannelIsMedianCentered) {
  SynthParams p;
  p.n_patients = 1;
  const auto rec = synth_generate(p)[0];
  const auto parts = partition(rec);
  for (auto part : kAllParts) {
    for (const auto& seg : windows(rec, part, *parts[part], false)) {
      for (size_t c = 0; c < kNumChannels; ++c) {
        EXPECT_NEAR(median(interpret::channel(seg.data, c)), 0.0, 1e-9);
      }
    }
  }
}

std::vector<std::string> ids(size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back("P" + std::to_string(1000 + i));
  return out;
}

TEST(SplitPlanTest, HundredPatients) {
  const auto plan = split_patients(ids(100), 5);
  EXPECT_EQ(plan.test_patients.size(), 20u);
  EXPECT_EQ(plan.train_patients.size(), 80u);
  for (const auto& f : plan.folds) EXPECT_EQ(f.test.size(), 16u);
}

TEST(SplitPlanTest, DisjointAndCovering) {
  for (size_t n : {10u, 23u, 40u, 100u}) {
    const auto plan = split_patients(ids(n), n);
    std::set<std::string> test(plan.test_patients.begin(), plan.test_patients.end());
    std::multiset<std::string> fold_tests;
    for (const auto& id : plan.train_patients) EXPECT_EQ(test.count(id), 0u);
    for (const auto& f : plan.folds) {
      std::set<std::string> ft(f.test.begin(), f.test.end());
      fold_tests.insert(f.test.begin(), f.test.end());
      std::set<std::string> fit(f.train.begin(), f.train.end());
      EXPECT_EQ(f.test.size() + f.train.size() + f.validation.size(), plan.train_patients.size());
      for (const auto& id : f.train) EXPECT_EQ(ft.count(id), 0u);
      for (const auto& id : f.validation) {
        EXPECT_EQ(ft.count(id), 0u);
        EXPECT_EQ(fit.count(id), 0u);
      }
      EXPECT_FALSE(f.validation.empty());
    }
    EXPECT_EQ(fold_tests.size(), plan.train_patients.size());
    for (const auto& id : plan.train_patients) EXPECT_EQ(fold_tests.count(id), 1u);
    EXPECT_EQ(plan.final_fit.size() + plan.final_validation.size(), plan.train_patients.size());
  }
}

TEST(SplitPlanTest, DeterministicAndSerializable) {
  const auto a = split_patients(ids(40), 9);
  const auto b = split_patients(ids(40), 9);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_NE(to_json(a), to_json(split_patients(ids(40), 10)));
  EXPECT_EQ(to_json(split_plan_from_json(to_json(a))), to_json(a));
  EXPECT_THROW(split_patients(ids(9), 1), Error);
}

TEST(SynthTest, Deterministic) {
  SynthParams p;
  p.n_patients = 3;
  EXPECT_EQ(serialize_records(synth_generate(p)), serialize_records(synth_generate(p)));
  SynthParams q = p;
  q.seed = 8;
  EXPECT_NE(serialize_records(synth_generate(p)), serialize_records(synth_generate(q)));
}

double rms(const EegRecord& r, SampleRange range) {
  double ss = 0.0;
  for (size_t i = range.begin; i < range.end; ++i) {
    for (size_t c = 0; c < kNumChannels; ++c) ss += r.at(i, c) * r.at(i, c);
  }
  return std::sqrt(ss / (range.size() * kNumChannels));
}

TEST(SynthTest, CorpusMorphology) {
  const auto corpus = synth_generate(SynthParams{});
  ASSERT_EQ(corpus.size(), 40u);
  for (const auto& r : corpus) {
    EXPECT_EQ(r.fs, 256);
    const auto parts = partition(r);
    for (auto p : kAllParts) ASSERT_TRUE(parts.available(p)) << r.record_id;
    EXPECT_GE(rms(r, *parts[Part::kIctal]) / rms(r, *parts[Part::kInterictal]), 2.0) << r.record_id;
    for (size_t c = 0; c < kNumChannels; ++c) {
      std::vector<double> x;
      for (size_t i = parts[Part::kInterictal]->begin; i < parts[Part::kInterictal]->end; ++i) {
        x.push_back(r.at(i, c));
      }
      const auto s = interpret::welch_psd(x);
      const size_t peak = std::max_element(s.power.begin(), s.power.end()) - s.power.begin();
      EXPECT_GE(s.freqs[peak], 8.0) << r.record_id << " ch " << c;
      EXPECT_LE(s.freqs[peak], 12.0) << r.record_id << " ch " << c;
    }
  }
}

TEST(StoreTest, RoundTripAndCorruption) {
  SynthParams p;
  p.n_patients = 2;
  const auto recs = synth_generate(p);
  const std::string bytes = serialize_records(recs);
  const auto back = deserialize_records(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].samples, recs[1].samples);
  EXPECT_EQ(back[1].onset_sample, recs[1].onset_sample);
  std::string bad = bytes;
  bad[bad.size() / 2] ^= 1;
  EXPECT_THROW(deserialize_records(bad), Error);
  EXPECT_THROW(deserialize_records(bytes.substr(0, bytes.size() - 9)), Error);
}

TEST(TrainingSegmentsTest, FortySixPerRecord) {
  SynthParams p;
  p.n_patients = 1;
  const auto segs = training_segments(synth_generate(p)[0]);
  ASSERT_EQ(segs.size(), 46u);
  EXPECT_EQ(std::count_if(segs.begin(), segs.end(), [](const Segment& s) { return s.label == Label::kIctal; }),
            23);
}

}  // namespace
}  // namespace seizure::eeg
