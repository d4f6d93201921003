#include "seizure/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "seizure/common.hpp"

namespace seizure::metrics {

namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

void check_inputs(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) {
    throw Error(ErrorCode::kShape, "labels and probabilities differ in length (" +
                                       std::to_string(labels.size()) + " vs " +
                                       std::to_string(probs.size()) + ")");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidInput, "labels must be 0 or 1");
  }
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const int> labels, std::span<const double> probs, double threshold) {
  check_inputs(labels, probs);
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "threshold must lie in (0, 1)");
  }
  ConfusionCounts c;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool positive = probs[i] >= threshold;
    if (labels[i] == 1) {
      positive ? ++c.tp : ++c.fn;
    } else {
      positive ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

MetricSet metric_set(const ConfusionCounts& c, std::optional<double> threshold) {
  MetricSet m;
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
  m.sensitivity = ratio(tp, tp + fn);
  m.precision = ratio(tp, tp + fp);
  m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  m.threshold = threshold;
  return m;
}

double roc_auc(std::span<const int> labels, std::span<const double> probs) {
  check_inputs(labels, probs);
  const auto n_pos = static_cast<size_t>(std::count(labels.begin(), labels.end(), 1));
  const size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::kInvalidInput, "AUC needs both classes present");

  std::vector<size_t> order(labels.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return probs[a] > probs[b]; });

  // Sweep thresholds from high to low; each group of equal scores is one step.
  double area = 0.0;
  double tp = 0.0, fp = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    const double score = probs[order[i]];
    double dtp = 0.0, dfp = 0.0;
    for (; i < order.size() && probs[order[i]] == score; ++i) {
      labels[order[i]] == 1 ? ++dtp : ++dfp;
    }
    area += dfp * (tp + 0.5 * dtp);
    tp += dtp;
    fp += dfp;
  }
  return area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / n);
  return r;
}

std::vector<size_t> prob_histogram(std::span<const double> probs, size_t n_bins) {
  if (n_bins == 0) throw Error(ErrorCode::kInvalidInput, "histogram needs at least one bin");
  std::vector<size_t> counts(n_bins, 0);
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kInvalidInput, "probability outside [0, 1]");
    auto bin = static_cast<size_t>(p * static_cast<double>(n_bins));
    counts[std::min(bin, n_bins - 1)]++;
  }
  return counts;
}

std::string histogram_csv(std::span<const size_t> counts) {
  std::ostringstream out;
  out << "bin,lower,upper,count\n";
  const double width = 1.0 / static_cast<double>(counts.size());
  for (size_t b = 0; b < counts.size(); ++b) {
    out << b << ',' << format_double(static_cast<double>(b) * width) << ','
        << format_double(static_cast<double>(b + 1) * width) << ',' << counts[b] << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const MetricSet& m) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json("undefined");
  };
  nlohmann::json j = {{"accuracy", opt(m.accuracy)},
                      {"sensitivity", opt(m.sensitivity)},
                      {"precision", opt(m.precision)},
                      {"f1", opt(m.f1)}};
  if (m.threshold) j["threshold"] = *m.threshold;
  return j;
}

nlohmann::json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

std::string format_metric(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("undefined");
}

std::string metric_rows_csv(std::span<const MetricRow> rows) {
  std::ostringstream out;
  out << "k,threshold,fold,tp,fp,tn,fn,accuracy,sensitivity,precision,f1\n";
  for (const auto& r : rows) {
    out << r.k << ',' << format_double(r.threshold) << ',' << r.fold << ',' << r.counts.tp << ','
        << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn << ','
        << format_metric(r.metrics.accuracy) << ',' << format_metric(r.metrics.sensitivity) << ','
        << format_metric(r.metrics.precision) << ',' << format_metric(r.metrics.f1) << '\n';
  }
  return out.str();
}

}  // namespace seizure::metrics
