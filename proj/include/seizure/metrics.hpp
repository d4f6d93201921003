#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace seizure::metrics {

struct ConfusionCounts {
  size_t tp = 0;
  size_t fp = 0;
  size_t tn = 0;
  size_t fn = 0;

  size_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

// Ratios with a zero denominator are left empty rather than reported as 0.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> precision;
  std::optional<double> f1;
  std::optional<double> threshold;
};

// Positive iff p >= threshold.
ConfusionCounts confusion(std::span<const int> labels, std::span<const double> probs, double threshold);
MetricSet metric_set(const ConfusionCounts& counts, std::optional<double> threshold = std::nullopt);

// Trapezoidal ROC area; equal probabilities form one ROC step.
double roc_auc(std::span<const int> labels, std::span<const double> probs);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};
MeanStd mean_std(std::span<const double> values);

// Equal-width bins over [0, 1]; the last bin is closed on the right.
std::vector<size_t> prob_histogram(std::span<const double> probs, size_t n_bins = 50);
std::string histogram_csv(std::span<const size_t> counts);

nlohmann::json to_json(const MetricSet& m);
nlohmann::json to_json(const ConfusionCounts& c);
// "undefined" for an empty value.
std::string format_metric(const std::optional<double>& v);

// One Table-1 style row keyed by (model k, threshold, fold or "concat").
struct MetricRow {
  size_t k = 0;
  double threshold = 0.0;
  std::string fold;
  ConfusionCounts counts;
  MetricSet metrics;
};
std::string metric_rows_csv(std::span<const MetricRow> rows);

}  // namespace seizure::metrics
