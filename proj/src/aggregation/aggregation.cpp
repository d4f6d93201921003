#include "seizure/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seizure/common.hpp"

namespace seizure::aggregation {

std::string_view to_string(Method m) { return m == Method::kBayes ? "bayes" : "diff"; }

Method method_from_string(std::string_view name) {
  if (name == "bayes") return Method::kBayes;
  if (name == "diff") return Method::kDiff;
  throw Error(ErrorCode::kInvalidInput, "unknown method '" + std::string(name) + "' (expected bayes or diff)");
}

std::vector<std::optional<double>> bayes_logodds(std::span<const double> p, size_t window) {
  if (window == 0) throw Error(ErrorCode::kInvalidInput, "window must be at least 1");
  if (p.size() < window) {
    throw Error(ErrorCode::kInvalidInput, "series of length " + std::to_string(p.size()) +
                                              " is shorter than window " + std::to_string(window));
  }
  std::vector<double> logit(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kLogOddsClamp, 1.0 - kLogOddsClamp);
    logit[i] = std::log(q) - std::log(1.0 - q);
  }
  std::vector<std::optional<double>> out(p.size());
  for (size_t t = window - 1; t < p.size(); ++t) {
    double sum = 0.0;
    for (size_t i = t + 1 - window; i <= t; ++i) sum += logit[i];
    out[t] = sum;
  }
  return out;
}

Decisions bayes_decide(std::span<const double> p, const BayesParams& params) {
  const auto evidence = bayes_logodds(p, params.window);
  Decisions d(p.size(), 0);
  for (size_t t = 0; t < p.size(); ++t) d[t] = evidence[t] && *evidence[t] > params.threshold;
  return d;
}

Decisions diff_decide(std::span<const double> p, const DiffParams& params) {
  if (params.lag == 0) throw Error(ErrorCode::kInvalidInput, "lag must be at least 1");
  Decisions d(p.size(), 0);
  for (size_t t = params.lag; t < p.size(); ++t) d[t] = p[t] - p[t - params.lag] > params.threshold;
  return d;
}

SeizureOutcome seizure_eval(std::span<const uint8_t> decisions, std::span<const eeg::Part> part_tags,
                            std::string record_id) {
  if (decisions.size() != part_tags.size()) {
    throw Error(ErrorCode::kShape, "decisions and part tags differ in length");
  }
  SeizureOutcome o;
  o.record_id = std::move(record_id);
  bool has_ictal = false, has_interictal = false;
  for (size_t t = 0; t < decisions.size(); ++t) {
    const auto part = static_cast<size_t>(part_tags[t]);
    has_ictal |= part_tags[t] == eeg::Part::kIctal;
    has_interictal |= part_tags[t] == eeg::Part::kInterictal;
    if (decisions[t] != 0 && !o.first_detection[part]) o.first_detection[part] = t;
  }
  o.scored = has_ictal && has_interictal;
  o.detected_in_ictal = o.first_detection[static_cast<size_t>(eeg::Part::kIctal)].has_value();
  o.false_positive_in_interictal = o.first_detection[static_cast<size_t>(eeg::Part::kInterictal)].has_value();
  return o;
}

SeizureScore seizure_metrics(std::span<const SeizureOutcome> outcomes) {
  SeizureScore s;
  for (const auto& o : outcomes) {
    if (!o.scored) {
      s.log.push_back("skipped record '" + o.record_id + "': ictal or interictal part missing");
      continue;
    }
    o.detected_in_ictal ? ++s.counts.tp : ++s.counts.fn;
    o.false_positive_in_interictal ? ++s.counts.fp : ++s.counts.tn;
  }
  s.metrics = metrics::metric_set(s.counts);
  return s;
}

Decisions decide(Method method, std::span<const double> p, size_t window, double threshold) {
  return method == Method::kBayes ? bayes_decide(p, {window, threshold}) : diff_decide(p, {window, threshold});
}

SeizureScore score_series(Method method, std::span<const model::ProbabilitySeries> series, size_t window,
                          double threshold) {
  std::vector<SeizureOutcome> outcomes;
  outcomes.reserve(series.size());
  for (const auto& s : series) {
    outcomes.push_back(seizure_eval(decide(method, s.p, window, threshold), s.parts, s.record_id));
  }
  return seizure_metrics(outcomes);
}

Grid default_grid(Method method) {
  Grid g;
  for (size_t w = 1; w <= 23; ++w) g.windows.push_back(w);
  if (method == Method::kBayes) {
    for (int i = 0; i <= 20; ++i) g.thresholds.push_back(i * 0.25);
  } else {
    for (int i = 1; i <= 19; ++i) g.thresholds.push_back(i / 20.0);
  }
  return g;
}

GridResult grid_search(Method method, std::span<const model::ProbabilitySeries> series, const Grid& grid) {
  if (grid.windows.empty() || grid.thresholds.empty()) throw Error(ErrorCode::kInvalidInput, "grid is empty");
  GridResult r;
  r.method = method;
  r.grid = grid;
  r.f1.assign(grid.windows.size(), std::vector<std::optional<double>>(grid.thresholds.size()));
  std::optional<double> best;
  for (size_t row = 0; row < grid.windows.size(); ++row) {
    for (size_t col = 0; col < grid.thresholds.size(); ++col) {
      const auto f1 = score_series(method, series, grid.windows[row], grid.thresholds[col]).metrics.f1;
      r.f1[row][col] = f1;
      if (f1 && (!best || *f1 > *best)) best = f1;
    }
  }
  if (!best) {
    throw Error(ErrorCode::kNumeric, "F1 is undefined at every grid cell (no positives and no alarms)");
  }
  // Rows are ordered by window, so the first maximal cell in row-major
  // order of the sorted grid is the tie-break winner.
  std::vector<size_t> rows(grid.windows.size()), cols(grid.thresholds.size());
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (size_t i = 0; i < cols.size(); ++i) cols[i] = i;
  std::stable_sort(rows.begin(), rows.end(), [&](size_t a, size_t b) { return grid.windows[a] < grid.windows[b]; });
  std::stable_sort(cols.begin(), cols.end(),
                   [&](size_t a, size_t b) { return grid.thresholds[a] < grid.thresholds[b]; });
  bool chosen = false;
  for (size_t row : rows) {
    for (size_t col : cols) {
      if (r.f1[row][col] && *r.f1[row][col] == *best) {
        r.tied_cells.emplace_back(row, col);
        if (!chosen) {
          r.best_row = row;
          r.best_col = col;
          chosen = true;
        }
      }
    }
  }
  r.best_f1 = *best;
  return r;
}

std::string grid_csv(const GridResult& r) {
  std::ostringstream out;
  out << (r.method == Method::kBayes ? "W" : "M");
  for (double th : r.grid.thresholds) out << ",th=" << format_double(th);
  out << '\n';
  for (size_t row = 0; row < r.grid.windows.size(); ++row) {
    out << r.grid.windows[row];
    for (const auto& v : r.f1[row]) out << ',' << metrics::format_metric(v);
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const GridResult& r) {
  nlohmann::json j;
  j["method"] = std::string(to_string(r.method));
  j[r.method == Method::kBayes ? "W" : "M"] = r.best_window();
  j[r.method == Method::kBayes ? "th" : "th_d"] = r.best_threshold();
  j["window"] = r.best_window();
  j["threshold"] = r.best_threshold();
  j["f1"] = r.best_f1;
  auto ties = nlohmann::json::array();
  for (const auto& [row, col] : r.tied_cells) {
    ties.push_back({{"window", r.grid.windows[row]}, {"threshold", r.grid.thresholds[col]}});
  }
  j["tied_cells"] = ties;
  j["tie_break"] = "smallest window, then smallest threshold";
  return j;
}

std::string timeline_csv(const model::ProbabilitySeries& series, std::span<const uint8_t> decisions) {
  if (decisions.size() != series.size()) throw Error(ErrorCode::kShape, "timeline length mismatch");
  std::ostringstream out;
  out << "window,part,start_sample,p,decision\n";
  for (size_t t = 0; t < series.size(); ++t) {
    out << t << ',' << eeg::to_string(series.parts[t]) << ',' << series.starts[t] << ','
        << format_double(series.p[t]) << ',' << int(decisions[t] != 0) << '\n';
  }
  return out.str();
}

}  // namespace seizure::aggregation
