#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "seizure/eeg_data.hpp"
#include "seizure/metrics.hpp"
#include "seizure/model.hpp"

namespace seizure::aggregation {

// One byte per window; nonzero means an alarm.
using Decisions = std::vector<uint8_t>;

inline constexpr double kLogOddsClamp = 1e-6;

struct BayesParams {
  size_t window = 1;       // W, consecutive outputs summed
  double threshold = 0.0;  // th, log-odds units
};

struct DiffParams {
  size_t lag = 1;          // M, in 2.5 s steps
  double threshold = 0.5;  // th_d
};

enum class Method { kBayes, kDiff };
std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

// Sum of ln(p / (1 - p)) over the last W outputs; empty before index W - 1.
std::vector<std::optional<double>> bayes_logodds(std::span<const double> p, size_t window);
Decisions bayes_decide(std::span<const double> p, const BayesParams& params);
// Positive iff p(t) - p(t - M) > th_d; the first M windows are negative.
Decisions diff_decide(std::span<const double> p, const DiffParams& params);

struct SeizureOutcome {
  std::string record_id;
  bool scored = false;  // false when the ictal or interictal part is missing
  bool detected_in_ictal = false;
  bool false_positive_in_interictal = false;
  // First positive series index inside each part, by eeg::Part order.
  std::array<std::optional<size_t>, 4> first_detection;
};

SeizureOutcome seizure_eval(std::span<const uint8_t> decisions, std::span<const eeg::Part> part_tags,
                            std::string record_id = {});

struct SeizureScore {
  metrics::ConfusionCounts counts;
  metrics::MetricSet metrics;
  std::vector<std::string> log;  // one entry per skipped record
};

// Each scored record adds one positive unit (its ictal part) and one
// negative unit (its interictal part).
SeizureScore seizure_metrics(std::span<const SeizureOutcome> outcomes);

Decisions decide(Method method, std::span<const double> p, size_t window, double threshold);
SeizureScore score_series(Method method, std::span<const model::ProbabilitySeries> series, size_t window,
                          double threshold);

struct Grid {
  std::vector<size_t> windows;  // W or M
  std::vector<double> thresholds;
};

// W in 1..23 with th in 0..5 step 0.25; M in 1..23 with th_d in 0.05..0.95 step 0.05.
Grid default_grid(Method method);

struct GridResult {
  Method method = Method::kBayes;
  Grid grid;
  // f1[row][col] for windows[row], thresholds[col].
  std::vector<std::vector<std::optional<double>>> f1;
  size_t best_row = 0;
  size_t best_col = 0;
  double best_f1 = 0.0;
  // Every cell attaining the maximum, in row-major order.
  std::vector<std::pair<size_t, size_t>> tied_cells;

  size_t best_window() const { return grid.windows[best_row]; }
  double best_threshold() const { return grid.thresholds[best_col]; }
};

// Smallest window, then smallest threshold, among cells of maximal F1.
GridResult grid_search(Method method, std::span<const model::ProbabilitySeries> series, const Grid& grid);

// Rows are windows, columns thresholds.
std::string grid_csv(const GridResult& result);
nlohmann::json to_json(const GridResult& result);
std::string timeline_csv(const model::ProbabilitySeries& series, std::span<const uint8_t> decisions);

}  // namespace seizure::aggregation
