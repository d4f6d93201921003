#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "seizure/common.hpp"
#include "seizure/eeg_data.hpp"

namespace seizure::eeg {

std::string_view to_string(Part part) {
  switch (part) {
    case Part::kExtendedInterictal: return "extended_interictal";
    case Part::kInterictal: return "interictal";
    case Part::kPreictal: return "preictal";
    case Part::kIctal: return "ictal";
  }
  return "unknown";
}

Part part_from_string(std::string_view name) {
  for (Part p : kAllParts) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorCode::kParse, "unknown part tag '" + std::string(name) + "'");
}

namespace {

bool supported_fs(int fs) { return fs == 256 || fs == 512 || fs == 1024; }

void check_onset(size_t onset, size_t n_samples, int fs) {
  if (onset + 60 * static_cast<size_t>(fs) > n_samples) {
    throw Error(ErrorCode::kInvalidInput,
                "insufficient ictal duration: onset " + std::to_string(onset) + " + 60 s exceeds " +
                    std::to_string(n_samples) + " samples");
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("manifest: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::kParse, "manifest must be a JSON array");
  std::vector<ManifestEntry> out;
  for (size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    try {
      ManifestEntry m;
      m.patient_id = e.at("patient_id").get<std::string>();
      m.file = e.at("file").get<std::string>();
      m.fs = e.at("fs").get<int>();
      m.onset_sample = e.at("onset_sample").get<size_t>();
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kParse, "manifest entry " + std::to_string(i) + ": " + ex.what());
    }
  }
  return out;
}

EegRecord load_record(const ManifestEntry& entry, const std::filesystem::path& csv_path) {
  if (!supported_fs(entry.fs)) {
    throw Error(ErrorCode::kInvalidInput,
                "unsupported sampling rate " + std::to_string(entry.fs) + " Hz");
  }
  const std::string text = read_file(csv_path);
  EegRecord rec;
  rec.patient_id = entry.patient_id;
  rec.record_id = std::filesystem::path(entry.file).stem().string();
  for (size_t c = 0; c < kNumChannels; ++c) rec.channels[c] = std::string(kChannelNames[c]);
  rec.fs = entry.fs;
  rec.onset_sample = entry.onset_sample;

  size_t row = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != kNumChannels) {
      throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ": expected 4 columns, got " +
                                         std::to_string(cells.size()));
    }
    for (size_t c = 0; c < kNumChannels; ++c) {
      const std::string_view cell = trim(cells[c]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ", column " +
                                           std::to_string(c) + ": non-numeric cell '" +
                                           std::string(cell) + "'");
      }
      rec.samples.push_back(v);
    }
    ++row;
  }
  check_onset(rec.onset_sample, rec.n_samples(), rec.fs);
  return rec;
}

std::vector<double> decimation_filter(int fs) {
  if (fs != 512 && fs != 1024) {
    throw Error(ErrorCode::kInvalidInput, "no decimation filter for " + std::to_string(fs) + " Hz");
  }
  const int factor = fs / kTargetFs;
  // 127 taps at 512 Hz; scaled with the factor so the transition band is the
  // same width in Hz at every input rate.
  const size_t n_taps = 63 * static_cast<size_t>(factor) + 1;
  const double cutoff_hz = 0.45 * kTargetFs;
  const double fc = 2.0 * cutoff_hz / fs;  // normalized to Nyquist
  const double mid = (static_cast<double>(n_taps) - 1.0) / 2.0;
  std::vector<double> h(n_taps);
  double sum = 0.0;
  for (size_t i = 0; i < n_taps; ++i) {
    const double x = static_cast<double>(i) - mid;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * fc * x) / (std::numbers::pi * fc * x);
    const double window =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / (n_taps - 1));
    h[i] = fc * sinc * window;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

EegRecord resample_to_256(const EegRecord& record) {
  if (!supported_fs(record.fs)) {
    throw Error(ErrorCode::kInvalidInput,
                "unsupported sampling rate " + std::to_string(record.fs) + " Hz");
  }
  if (record.fs == kTargetFs) return record;

  const size_t factor = static_cast<size_t>(record.fs / kTargetFs);
  const auto h = decimation_filter(record.fs);
  const long half = static_cast<long>(h.size() / 2);
  const long n = static_cast<long>(record.n_samples());
  const size_t n_out = (record.n_samples() + factor - 1) / factor;

  // Mirror extension at both ends.
  auto mirror = [n](long i) {
    if (n == 1) return 0L;
    const long period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };

  EegRecord out = record;
  out.fs = kTargetFs;
  out.samples.assign(n_out * kNumChannels, 0.0);
  out.onset_sample = record.onset_sample / factor;
  for (size_t j = 0; j < n_out; ++j) {
    const long center = static_cast<long>(j * factor);
    double acc[kNumChannels] = {0, 0, 0, 0};
    for (size_t k = 0; k < h.size(); ++k) {
      const long src = mirror(center + half - static_cast<long>(k));
      const double* row = &record.samples[static_cast<size_t>(src) * kNumChannels];
      for (size_t c = 0; c < kNumChannels; ++c) acc[c] += h[k] * row[c];
    }
    for (size_t c = 0; c < kNumChannels; ++c) out.samples[j * kNumChannels + c] = acc[c];
  }
  return out;
}

RecordParts partition(const EegRecord& record) {
  if (record.fs != kTargetFs) {
    throw Error(ErrorCode::kInvalidInput, "partition requires a 256 Hz record");
  }
  RecordParts parts;
  const size_t onset = record.onset_sample;
  auto place = [&](Part p, size_t parts_before_onset) {
    const size_t back = parts_before_onset * kPartLen;
    if (onset < back) return;
    parts.ranges[static_cast<size_t>(p)] = SampleRange{onset - back, onset - back + kPartLen};
  };
  place(Part::kExtendedInterictal, 3);
  place(Part::kInterictal, 2);
  place(Part::kPreictal, 1);
  if (onset + kPartLen <= record.n_samples()) {
    parts.ranges[static_cast<size_t>(Part::kIctal)] = SampleRange{onset, onset + kPartLen};
  }
  return parts;
}

size_t window_count(size_t n_samples) {
  if (n_samples < kWindowLen) return 0;
  return (n_samples - kWindowLen) / kWindowStride + 1;
}

void center_channels(std::span<double> block) {
  const size_t n = block.size() / kNumChannels;
  if (n == 0) return;
  std::vector<double> column(n);
  for (size_t c = 0; c < kNumChannels; ++c) {
    for (size_t i = 0; i < n; ++i) column[i] = block[i * kNumChannels + c];
    const size_t mid = n / 2;
    std::nth_element(column.begin(), column.begin() + mid, column.end());
    double median = column[mid];
    if (n % 2 == 0) {
      const double lower = *std::max_element(column.begin(), column.begin() + mid);
      median = 0.5 * (lower + median);
    }
    for (size_t i = 0; i < n; ++i) block[i * kNumChannels + c] -= median;
  }
}

std::vector<Segment> windows(const EegRecord& record, Part part, SampleRange range, bool labeled) {
  if (range.end > record.n_samples() || range.begin > range.end) {
    throw Error(ErrorCode::kInvalidInput, "window range outside the record");
  }
  if (range.size() < kWindowLen) {
    throw Error(ErrorCode::kInvalidInput, "part of " + std::to_string(range.size()) +
                                              " samples is shorter than one window");
  }
  Label label = Label::kUnlabeled;
  if (labeled && part == Part::kIctal) label = Label::kIctal;
  if (labeled && part == Part::kInterictal) label = Label::kInterictal;

  const size_t count = window_count(range.size());
  std::vector<Segment> out;
  out.reserve(count);
  for (size_t w = 0; w < count; ++w) {
    const size_t start = range.begin + w * kWindowStride;
    Segment seg;
    seg.data.assign(record.samples.begin() + static_cast<std::ptrdiff_t>(start * kNumChannels),
                    record.samples.begin() +
                        static_cast<std::ptrdiff_t>((start + kWindowLen) * kNumChannels));
    center_channels(seg.data);
    seg.label = label;
    seg.record_id = record.record_id;
    seg.part = part;
    seg.start = start;
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<Segment> training_segments(const EegRecord& record) {
  const auto parts = partition(record);
  if (!parts.available(Part::kInterictal) || !parts.available(Part::kIctal)) return {};
  auto out = windows(record, Part::kInterictal, *parts[Part::kInterictal], true);
  auto ictal = windows(record, Part::kIctal, *parts[Part::kIctal], true);
  out.insert(out.end(), std::make_move_iterator(ictal.begin()), std::make_move_iterator(ictal.end()));
  return out;
}

}  // namespace seizure::eeg
