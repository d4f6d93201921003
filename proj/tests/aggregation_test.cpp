#include <cmath>

#include "gtest/gtest.h"
#include "seizure/aggregation.hpp"

namespace seizure::aggregation {
namespace {

using eeg::Part;

TEST(BayesTest, ClosedForms) {
  const std::vector<double> p(5, 0.9);
  const auto l = bayes_logodds(p, 5);
  for (size_t t = 0; t < 4; ++t) EXPECT_FALSE(l[t].has_value());
  EXPECT_NEAR(*l[4], 5.0 * std::log(9.0), 1e-12);
  EXPECT_NEAR(*l[4], 10.986, 1e-3);
  for (const auto& v : bayes_logodds(std::vector<double>(7, 0.5), 3)) {
    if (v) EXPECT_EQ(*v, 0.0);
  }
  const auto clamped = bayes_logodds(std::vector<double>{1.0, 0.0, 1.0}, 1);
  for (const auto& v : clamped) EXPECT_TRUE(std::isfinite(*v));
  EXPECT_THROW(bayes_logodds(std::vector<double>{0.5}, 2), Error);
}

// ln of the ratio of products, the direct reading of the evidence formula.
double product_ratio(const std::vector<double>& p, size_t t, size_t w) {
  double num = 1.0, den = 1.0;
  for (size_t i = t + 1 - w; i <= t; ++i) {
    const double q = std::clamp(p[i], 1e-6, 1.0 - 1e-6);
    num *= q;
    den *= 1.0 - q;
  }
  return std::log(num / den);
}

TEST(BayesTest, MatchesProductOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 1 + rng.below(30);
    const size_t w = 1 + rng.below(n);
    std::vector<double> p(n);
    for (double& v : p) v = rng.uniform();
    const auto l = bayes_logodds(p, w);
    for (size_t t = w - 1; t < n; ++t) EXPECT_NEAR(*l[t], product_ratio(p, t, w), 1e-12);
  }
}

TEST(BayesTest, Decisions) {
  const std::vector<double> p(5, 0.9);
  auto d = bayes_decide(p, {5, 1.5});
  EXPECT_EQ(d, (Decisions{0, 0, 0, 0, 1}));
  d = bayes_decide(p, {1, 1e9});
  EXPECT_EQ(d, Decisions(5, 0));
}

TEST(DiffTest, Definition) {
  EXPECT_EQ(diff_decide(std::vector<double>{0.3, 0.9}, {1, 0.45}), (Decisions{0, 1}));
  EXPECT_EQ(diff_decide(std::vector<double>(10, 0.7), {3, 0.05}), Decisions(10, 0));
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + rng.below(40);
    const size_t m = 1 + rng.below(23);
    const double th = rng.uniform(0.05, 0.95);
    std::vector<double> p(n);
    for (double& v : p) v = rng.uniform();
    const auto d = diff_decide(p, {m, th});
    for (size_t t = 0; t < n; ++t) EXPECT_EQ(d[t], t >= m && p[t] - p[t - m] > th);
  }
}

TEST(DiffTest, TranslationCovariant) {
  Rng rng(6);
  std::vector<double> p(40);
  for (double& v : p) v = rng.uniform();
  const size_t shift = 7;
  std::vector<double> shifted(shift, 0.5);
  shifted.insert(shifted.end(), p.begin(), p.end());
  const auto a = diff_decide(p, {3, 0.3});
  const auto b = diff_decide(shifted, {3, 0.3});
  for (size_t t = 3; t < p.size(); ++t) EXPECT_EQ(a[t], b[t + shift]);
}

TEST(MonotonicityTest, RaisingThresholdNeverAddsAlarms) {
  Rng rng(7);
  std::vector<double> p(60);
  for (double& v : p) v = rng.uniform();
  for (double th = 0.0; th < 5.0; th += 0.25) {
    const auto lo = bayes_decide(p, {4, th});
    const auto hi = bayes_decide(p, {4, th + 0.25});
    for (size_t t = 0; t < p.size(); ++t) EXPECT_LE(hi[t], lo[t]);
  }
  for (double th = 0.05; th < 0.9; th += 0.05) {
    const auto lo = diff_decide(p, {2, th});
    const auto hi = diff_decide(p, {2, th + 0.05});
    for (size_t t = 0; t < p.size(); ++t) EXPECT_LE(hi[t], lo[t]);
  }
}

std::vector<Part> four_part_tags() {
  std::vector<Part> tags;
  for (auto p : eeg::kAllParts) tags.insert(tags.end(), 23, p);
  return tags;
}

TEST(SeizureEvalTest, ScoringAndGreyRegions) {
  const auto tags = four_part_tags();
  Decisions d(92, 0);
  d[80] = 1;
  auto o = seizure_eval(d, tags, "r");
  EXPECT_TRUE(o.scored);
  EXPECT_TRUE(o.detected_in_ictal);
  EXPECT_FALSE(o.false_positive_in_interictal);
  EXPECT_EQ(*o.first_detection[3], 80u);

  Decisions grey(92, 0);
  for (size_t t = 0; t < 23; ++t) grey[t] = 1;
  for (size_t t = 46; t < 69; ++t) grey[t] = 1;
  o = seizure_eval(grey, tags, "r");
  EXPECT_FALSE(o.detected_in_ictal);
  EXPECT_FALSE(o.false_positive_in_interictal);
  const auto s = seizure_metrics(std::vector<SeizureOutcome>{o});
  EXPECT_EQ(s.counts.tp, 0u);
  EXPECT_EQ(s.counts.fp, 0u);
  EXPECT_THROW(seizure_eval(d, std::vector<Part>(3, Part::kIctal)), Error);
}

TEST(SeizureEvalTest, DetectionIndicesStayInTheirPart) {
  const auto tags = four_part_tags();
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Decisions d(92);
    for (auto& v : d) v = rng.uniform() < 0.1;
    const auto o = seizure_eval(d, tags);
    for (size_t p = 0; p < 4; ++p) {
      if (o.first_detection[p]) EXPECT_EQ(static_cast<size_t>(tags[*o.first_detection[p]]), p);
    }
  }
}

TEST(SeizureMetricsTest, CorpusArithmeticAndSkips) {
  std::vector<SeizureOutcome> outs;
  for (int i = 0; i < 10; ++i) {
    SeizureOutcome o;
    o.scored = true;
    o.detected_in_ictal = i < 9;
    o.false_positive_in_interictal = i < 2;
    outs.push_back(o);
  }
  SeizureOutcome skipped;
  skipped.record_id = "short";
  outs.push_back(skipped);
  const auto s = seizure_metrics(outs);
  EXPECT_EQ(s.counts, (metrics::ConfusionCounts{9, 2, 8, 1}));
  EXPECT_DOUBLE_EQ(*s.metrics.sensitivity, 0.9);
  EXPECT_NEAR(*s.metrics.precision, 9.0 / 11.0, 1e-12);
  ASSERT_EQ(s.log.size(), 1u);
  EXPECT_NE(s.log[0].find("short"), std::string::npos);
}

model::ProbabilitySeries oracle_series(const std::string& id) {
  model::ProbabilitySeries s;
  s.record_id = id;
  s.parts = four_part_tags();
  for (size_t t = 0; t < s.parts.size(); ++t) {
    s.p.push_back(s.parts[t] == Part::kIctal ? 0.95 : 0.05);
    s.starts.push_back(t * 640);
  }
  return s;
}

TEST(GridSearchTest, OracleSeriesRegion) {
  const std::vector<model::ProbabilitySeries> series = {oracle_series("a"), oracle_series("b")};
  const auto r = grid_search(Method::kBayes, series, default_grid(Method::kBayes));
  EXPECT_EQ(r.best_f1, 1.0);
  EXPECT_EQ(r.best_window(), 1u);
  EXPECT_EQ(r.best_threshold(), 0.0);
  // Constant 0.95 evidence over W ictal windows is W ln 19.
  for (size_t row = 0; row < 5; ++row) {
    const size_t w = r.grid.windows[row];
    for (size_t col = 0; col < r.grid.thresholds.size(); ++col) {
      const double th = r.grid.thresholds[col];
      if (th < w * std::log(19.0)) {
        EXPECT_EQ(*r.f1[row][col], 1.0) << w << " " << th;
      }
    }
  }
}

TEST(GridSearchTest, ArgmaxAndTieBreak) {
  Grid single{{4}, {0.5}};
  const std::vector<model::ProbabilitySeries> series = {oracle_series("a")};
  const auto one = grid_search(Method::kDiff, series, single);
  EXPECT_EQ(one.best_window(), 4u);
  EXPECT_EQ(one.best_threshold(), 0.5);

  const auto r = grid_search(Method::kDiff, series, default_grid(Method::kDiff));
  double mx = 0.0;
  for (const auto& row : r.f1) {
    for (const auto& v : row) {
      if (v) mx = std::max(mx, *v);
    }
  }
  EXPECT_EQ(*r.f1[r.best_row][r.best_col], mx);
  EXPECT_EQ(r.best_f1, mx);
  EXPECT_EQ(r.tied_cells.front(), std::make_pair(r.best_row, r.best_col));
  for (const auto& [row, col] : r.tied_cells) {
    EXPECT_TRUE(r.grid.windows[row] > r.best_window() ||
                (r.grid.windows[row] == r.best_window() && r.grid.thresholds[col] >= r.best_threshold()));
  }
  const auto again = grid_search(Method::kDiff, series, default_grid(Method::kDiff));
  EXPECT_EQ(grid_csv(again), grid_csv(r));
  EXPECT_EQ(to_json(again), to_json(r));
}

TEST(GridSearchTest, AllUndefinedIsAnError) {
  auto s = oracle_series("a");
  for (auto& t : s.parts) t = Part::kPreictal;
  EXPECT_THROW(grid_search(Method::kBayes, std::vector<model::ProbabilitySeries>{s}, Grid{{1}, {0.0}}), Error);
  EXPECT_THROW(grid_search(Method::kBayes, std::vector<model::ProbabilitySeries>{s}, Grid{}), Error);
}

TEST(GridTest, DefaultRanges) {
  const auto b = default_grid(Method::kBayes);
  EXPECT_EQ(b.windows.size(), 23u);
  EXPECT_EQ(b.thresholds.size(), 21u);
  EXPECT_EQ(b.thresholds.back(), 5.0);
  const auto d = default_grid(Method::kDiff);
  EXPECT_EQ(d.thresholds.size(), 19u);
  EXPECT_DOUBLE_EQ(d.thresholds.front(), 0.05);
  EXPECT_DOUBLE_EQ(d.thresholds.back(), 0.95);
  for (double th : {1.5, 2.5}) EXPECT_NE(std::find(b.thresholds.begin(), b.thresholds.end(), th), b.thresholds.end());
  for (double th : {0.45, 0.5}) {
    EXPECT_TRUE(std::any_of(d.thresholds.begin(), d.thresholds.end(), [&](double v) { return std::abs(v - th) < 1e-12; }));
  }
}

TEST(ExportTest, GridAndTimelineCsv) {
  const std::vector<model::ProbabilitySeries> series = {oracle_series("a")};
  const auto r = grid_search(Method::kBayes, series, Grid{{1, 2}, {0.0, 0.25}});
  EXPECT_EQ(grid_csv(r), "W,th=0,th=0.25\n1,1,1\n2,1,1\n");
  const auto d = decide(Method::kBayes, series[0].p, 1, 0.0);
  const std::string csv = timeline_csv(series[0], d);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "window,part,start_sample,p,decision");
  EXPECT_NE(csv.find("69,ictal,44160,0.95,1"), std::string::npos);
}

}  // namespace
}  // namespace seizure::aggregation
