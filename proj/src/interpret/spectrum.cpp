#include <algorithm>
#include <cmath>
#include <numbers>

#include "seizure/interpret.hpp"

namespace seizure::interpret {

std::vector<double> channel(std::span<const double> block, size_t ch) {
  const size_t n = block.size() / eeg::kNumChannels;
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = block[i * eeg::kNumChannels + ch];
  return out;
}

Spectrum welch_psd(std::span<const double> signal, double fs, size_t segment_len) {
  if (segment_len < 2) throw Error(ErrorCode::kInvalidInput, "segment length must be at least 2");
  if (signal.size() < segment_len) {
    throw Error(ErrorCode::kInvalidInput, "signal of " + std::to_string(signal.size()) +
                                              " samples is shorter than the Welch segment (" +
                                              std::to_string(segment_len) + ")");
  }
  Spectrum s;
  s.fs = fs;
  s.segment_len = segment_len;
  s.overlap = segment_len / 2;
  const size_t step = segment_len - s.overlap;
  const size_t n_bins = segment_len / 2 + 1;

  // Periodic Hann window and a cos/sin table indexed by (k * n) mod N.
  std::vector<double> window(segment_len), cos_t(segment_len), sin_t(segment_len);
  double window_power = 0.0;
  for (size_t i = 0; i < segment_len; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment_len);
    window[i] = 0.5 - 0.5 * std::cos(a);
    window_power += window[i] * window[i];
    cos_t[i] = std::cos(a);
    sin_t[i] = std::sin(a);
  }

  s.power.assign(n_bins, 0.0);
  size_t n_segments = 0;
  std::vector<double> buf(segment_len);
  for (size_t start = 0; start + segment_len <= signal.size(); start += step, ++n_segments) {
    double mean = 0.0;
    for (size_t i = 0; i < segment_len; ++i) mean += signal[start + i];
    mean /= static_cast<double>(segment_len);
    for (size_t i = 0; i < segment_len; ++i) buf[i] = (signal[start + i] - mean) * window[i];
    for (size_t k = 0; k < n_bins; ++k) {
      double re = 0.0, im = 0.0;
      size_t idx = 0;
      for (size_t i = 0; i < segment_len; ++i) {
        re += buf[i] * cos_t[idx];
        im -= buf[i] * sin_t[idx];
        idx += k;
        if (idx >= segment_len) idx -= segment_len;
      }
      double p = (re * re + im * im) / (fs * window_power);
      const bool nyquist = segment_len % 2 == 0 && k == n_bins - 1;
      if (k != 0 && !nyquist) p *= 2.0;
      s.power[k] += p;
    }
  }
  for (double& p : s.power) p /= static_cast<double>(n_segments);
  s.freqs.resize(n_bins);
  for (size_t k = 0; k < n_bins; ++k) s.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(segment_len);
  return s;
}

std::vector<double> main_frequencies(const Spectrum& s, double relative_floor) {
  const auto& p = s.power;
  if (p.empty()) return {};
  const double peak = *std::max_element(p.begin(), p.end());
  if (!(peak > 0.0)) return {};
  std::vector<size_t> maxima;
  for (size_t k = 0; k < p.size(); ++k) {
    const bool left = k == 0 || p[k] >= p[k - 1];
    const bool right = k + 1 == p.size() || p[k] > p[k + 1];
    if (left && right && p[k] >= relative_floor * peak) maxima.push_back(k);
  }
  std::stable_sort(maxima.begin(), maxima.end(), [&](size_t a, size_t b) { return p[a] > p[b]; });
  std::vector<double> out;
  for (size_t k : maxima) out.push_back(std::round(s.freqs[k]));
  return out;
}

}  // namespace seizure::interpret
