#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace seizure::eeg {

inline constexpr int kTargetFs = 256;
inline constexpr size_t kNumChannels = 4;
inline constexpr size_t kWindowLen = 1280;     // 5 s at 256 Hz
inline constexpr size_t kWindowStride = 640;   // 50% overlap
inline constexpr size_t kPartLen = 15360;      // 60 s at 256 Hz
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "F7-T7", "F8-T8", "T7-P7", "T8-P8"};

struct EegRecord {
  std::string patient_id;
  std::string record_id;
  std::array<std::string, kNumChannels> channels;
  int fs = kTargetFs;
  // Row-major [n_samples][4], microvolts.
  std::vector<double> samples;
  size_t onset_sample = 0;

  size_t n_samples() const { return samples.size() / kNumChannels; }
  double at(size_t i, size_t ch) const { return samples[i * kNumChannels + ch]; }
};

// Time order within a record.
enum class Part { kExtendedInterictal = 0, kInterictal = 1, kPreictal = 2, kIctal = 3 };
inline constexpr std::array<Part, 4> kAllParts = {Part::kExtendedInterictal, Part::kInterictal,
                                                  Part::kPreictal, Part::kIctal};
std::string_view to_string(Part part);
Part part_from_string(std::string_view name);

struct SampleRange {
  size_t begin = 0;
  size_t end = 0;
  size_t size() const { return end - begin; }
  bool operator==(const SampleRange&) const = default;
};

// A part is available iff its optional holds a range.
struct RecordParts {
  std::array<std::optional<SampleRange>, 4> ranges;

  const std::optional<SampleRange>& operator[](Part p) const {
    return ranges[static_cast<size_t>(p)];
  }
  bool available(Part p) const { return (*this)[p].has_value(); }
};

enum class Label : int { kUnlabeled = -1, kInterictal = 0, kIctal = 1 };

struct Segment {
  // Row-major [1280][4], median-centered per channel.
  std::vector<double> data;
  Label label = Label::kUnlabeled;
  std::string record_id;
  Part part = Part::kInterictal;
  size_t start = 0;
};

struct ManifestEntry {
  std::string patient_id;
  std::string file;
  int fs = kTargetFs;
  size_t onset_sample = 0;
};

std::vector<ManifestEntry> parse_manifest(std::string_view json_text);

EegRecord load_record(const ManifestEntry& entry, const std::filesystem::path& csv_path);
EegRecord resample_to_256(const EegRecord& record);
// Low-pass taps used when decimating from `fs` to 256 Hz.
std::vector<double> decimation_filter(int fs);

RecordParts partition(const EegRecord& record);

// Windows of 1280 samples at stride 640 over `range`. Labeled windows get the
// ictal/interictal class of their part; all others are unlabeled.
std::vector<Segment> windows(const EegRecord& record, Part part, SampleRange range, bool labeled);
size_t window_count(size_t n_samples);

// Median-centers each channel of a row-major [n][4] block in place.
void center_channels(std::span<double> block);

// Interictal + ictal windows of a record, labeled; empty if either part is missing.
std::vector<Segment> training_segments(const EegRecord& record);

struct Fold {
  std::vector<std::string> test;
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

inline constexpr size_t kNumFolds = 5;

struct SplitPlan {
  uint64_t seed = 0;
  std::vector<std::string> test_patients;
  std::vector<std::string> train_patients;
  // Split of train_patients used when fitting the final model.
  std::vector<std::string> final_fit;
  std::vector<std::string> final_validation;
  std::array<Fold, kNumFolds> folds;
};

SplitPlan split_patients(std::vector<std::string> patient_ids, uint64_t seed);
nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::json& j);

struct SynthParams {
  size_t n_patients = 40;
  size_t records_per_patient = 1;
  double interictal_scale_uv = 20.0;
  double ictal_scale_uv = 30.0;
  double rhythm_lo_hz = 3.0;
  double rhythm_hi_hz = 5.0;
  double gamma_burst_prob = 0.5;
  uint64_t seed = 7;
  double record_seconds = 240.0;
  double onset_seconds = 180.0;
};

nlohmann::json to_json(const SynthParams& params);

std::vector<EegRecord> synth_generate(const SynthParams& params);

// Binary container for prepared 256 Hz records (JSON header, LE f64, CRC32).
std::string serialize_records(std::span<const EegRecord> records);
std::vector<EegRecord> deserialize_records(std::string_view bytes);

}  // namespace seizure::eeg
