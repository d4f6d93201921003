#include <algorithm>
#include <cmath>
#include <sstream>

#include "seizure/interpret.hpp"

namespace seizure::interpret {

namespace {

constexpr double kWidth = 1000.0;
constexpr double kLaneHeight = 80.0;
constexpr double kMargin = 70.0;

std::string freq_list(const std::vector<double>& freqs) {
  std::string s = "[";
  for (size_t i = 0; i < freqs.size(); ++i) {
    if (i > 0) s += ", ";
    s += format_double(freqs[i], 6);
  }
  return s + "]";
}

// Polyline of one channel scaled into a lane.
std::string trace(std::span<const double> block, size_t ch, double top, double height, double left, double width) {
  const auto x = channel(block, ch);
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 0.45 * height / peak : 0.0;
  std::ostringstream pts;
  const double dx = width / static_cast<double>(std::max<size_t>(x.size() - 1, 1));
  for (size_t i = 0; i < x.size(); ++i) {
    pts << format_double(left + dx * static_cast<double>(i), 6) << ','
        << format_double(top + height / 2 - scale * x[i], 6) << ' ';
  }
  return "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.6\" points=\"" + pts.str() + "\"/>\n";
}

}  // namespace

std::vector<double> smoothed_positive(const AttributionMap& map, size_t ch, size_t width) {
  const auto shap = channel(map.shap, ch);
  const size_t n = shap.size();
  std::vector<double> pos(n), out(n, 0.0);
  const double norm = map.normalization > 0.0 ? map.normalization : 1.0;
  for (size_t i = 0; i < n; ++i) pos[i] = std::max(shap[i], 0.0) / norm;
  const size_t half = width / 2;
  for (size_t i = 0; i < n; ++i) {
    const size_t lo = i >= half ? i - half : 0;
    const size_t hi = std::min(n, i + width - half);
    double sum = 0.0;
    for (size_t j = lo; j < hi; ++j) sum += pos[j];
    out[i] = sum / static_cast<double>(hi - lo);
  }
  return out;
}

std::string attribution_csv(const AttributionMap& map) {
  std::ostringstream out;
  out << "sample";
  for (auto name : eeg::kChannelNames) out << ',' << name;
  out << '\n';
  const size_t n = map.shap.size() / eeg::kNumChannels;
  for (size_t i = 0; i < n; ++i) {
    out << i;
    for (size_t ch = 0; ch < eeg::kNumChannels; ++ch) out << ',' << format_double(map.shap[i * eeg::kNumChannels + ch]);
    out << '\n';
  }
  return out.str();
}

std::string attribution_svg(const AttributionMap& map, std::span<const double> segment) {
  const size_t n = segment.size() / eeg::kNumChannels;
  const double plot_w = kWidth - kMargin - 10.0;
  const double height = kLaneHeight * eeg::kNumChannels + 40.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height << "\">\n";
  svg << "<text x=\"10\" y=\"20\" font-size=\"12\">delta=" << format_double(map.delta, 6)
      << " p=" << format_double(map.output, 6) << "</text>\n";
  const double dx = plot_w / static_cast<double>(n);
  for (size_t ch = 0; ch < eeg::kNumChannels; ++ch) {
    const double top = 30.0 + kLaneHeight * static_cast<double>(ch);
    const auto band = smoothed_positive(map, ch);
    // One rectangle per run of positive smoothed attribution.
    size_t i = 0;
    while (i < n) {
      if (band[i] <= 0.0) {
        ++i;
        continue;
      }
      const size_t start = i;
      double peak = 0.0;
      while (i < n && band[i] > 0.0) peak = std::max(peak, band[i++]);
      svg << "<rect class=\"band\" data-channel=\"" << ch << "\" x=\""
          << format_double(kMargin + dx * static_cast<double>(start), 6) << "\" y=\"" << top << "\" width=\""
          << format_double(dx * static_cast<double>(i - start), 6) << "\" height=\"" << kLaneHeight
          << "\" fill=\"red\" fill-opacity=\"" << format_double(std::clamp(peak, 0.05, 1.0), 4) << "\"/>\n";
    }
    svg << "<text x=\"5\" y=\"" << top + kLaneHeight / 2 << "\" font-size=\"11\">" << eeg::kChannelNames[ch]
        << "</text>\n";
    svg << trace(segment, ch, top, kLaneHeight, kMargin, plot_w);
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_attribution(const AttributionMap& map, std::span<const double> segment,
                        const std::filesystem::path& svg_path) {
  write_file_atomic(svg_path, attribution_svg(map, segment));
  auto csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write_file_atomic(csv_path, attribution_csv(map));
}

std::string maximized_svg(std::span<const MaximizedInput> inputs) {
  const double panel_h = kLaneHeight * eeg::kNumChannels + 30.0;
  const double plot_w = kWidth - kMargin - 10.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << panel_h * static_cast<double>(std::max<size_t>(inputs.size(), 1)) << "\">\n";
  for (size_t k = 0; k < inputs.size(); ++k) {
    const auto& in = inputs[k];
    const double base = panel_h * static_cast<double>(k);
    svg << "<text x=\"10\" y=\"" << base + 18 << "\" font-size=\"12\">filter " << in.filter
        << " pred=" << format_double(in.pred, 4) << " loss=" << format_double(in.objective, 6)
        << (in.dead_filter ? " (dead)" : "") << "</text>\n";
    for (size_t ch = 0; ch < eeg::kNumChannels; ++ch) {
      const double top = base + 25.0 + kLaneHeight * static_cast<double>(ch);
      svg << "<text x=\"5\" y=\"" << top + kLaneHeight / 2 << "\" font-size=\"10\">" << eeg::kChannelNames[ch]
          << ' ' << freq_list(in.main_frequencies[ch]) << "</text>\n";
      svg << trace(in.signal, ch, top, kLaneHeight, kMargin, plot_w);
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_maximized(std::span<const MaximizedInput> inputs, const std::filesystem::path& svg_path) {
  write_file_atomic(svg_path, maximized_svg(inputs));
}

std::string maximized_report_csv(std::span<const MaximizedInput> inputs) {
  std::ostringstream out;
  out << "filter_idx";
  for (auto name : eeg::kChannelNames) out << ',' << name;
  out << ",pred,loss,init_amp_uv,dead_filter\n";
  for (const auto& in : inputs) {
    out << in.filter;
    for (const auto& f : in.main_frequencies) out << ",\"" << freq_list(f) << '"';
    out << ',' << format_double(in.pred) << ',' << format_double(in.objective) << ','
        << format_double(in.init_amp_uv) << ',' << int(in.dead_filter) << '\n';
  }
  return out.str();
}

std::string spectra_csv(std::span<const MaximizedInput> inputs) {
  std::vector<std::vector<Spectrum>> spectra;
  for (const auto& in : inputs) {
    auto& row = spectra.emplace_back();
    for (size_t ch = 0; ch < eeg::kNumChannels; ++ch) row.push_back(welch_psd(channel(in.signal, ch)));
  }
  std::ostringstream out;
  out << "freq";
  for (const auto& in : inputs) {
    for (auto name : eeg::kChannelNames) out << ",f" << in.filter << '_' << name;
  }
  out << '\n';
  if (spectra.empty()) return out.str();
  const auto& freqs = spectra[0][0].freqs;
  for (size_t k = 0; k < freqs.size(); ++k) {
    out << format_double(freqs[k]);
    for (const auto& row : spectra) {
      for (const auto& s : row) out << ',' << format_double(s.power[k]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace seizure::interpret
