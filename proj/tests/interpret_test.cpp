#include <cmath>
#include <numbers>

#include "gtest/gtest.h"
#include "seizure/interpret.hpp"

namespace seizure::interpret {
namespace {

using nn::Shape;

std::vector<double> tone(double hz, size_t n = 1280, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * hz * i / 256.0 + phase);
  return x;
}

size_t peak_bin(const Spectrum& s) {
  return std::max_element(s.power.begin(), s.power.end()) - s.power.begin();
}

TEST(WelchTest, PureTonesPeakAtTheirFrequency) {
  for (double hz : {5.0, 8.0, 14.0, 72.0, 97.0}) {
    const auto s = welch_psd(tone(hz));
    ASSERT_EQ(s.freqs.size(), 129u);
    EXPECT_EQ(s.freqs[1], 1.0);
    EXPECT_EQ(s.freqs[peak_bin(s)], hz);
    EXPECT_EQ(main_frequencies(s), std::vector<double>{hz});
  }
}

TEST(WelchTest, DensityIntegratesToVariance) {
  const auto x = tone(14.0, 1280, 3.0);
  const auto s = welch_psd(x);
  double total = 0.0;
  for (double p : s.power) total += p;  // bins are 1 Hz wide
  EXPECT_NEAR(total, 4.5, 0.05);
}

TEST(WelchTest, TwoTonesAndNoise) {
  auto x = tone(6.0, 1280, 1.0);
  const auto y = tone(20.0, 1280, 0.8, 1.0);
  for (size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  const auto both = main_frequencies(welch_psd(x));
  EXPECT_EQ(both, (std::vector<double>{6.0, 20.0}));

  Rng rng(4);
  auto noisy = tone(11.0, 1280, 2.0);
  for (double& v : noisy) v += 0.5 * rng.normal();
  const auto s = welch_psd(noisy);
  EXPECT_EQ(s.freqs[peak_bin(s)], 11.0);
  EXPECT_EQ(main_frequencies(s).front(), 11.0);
}

TEST(WelchTest, DetrendAndErrors) {
  auto x = tone(9.0);
  for (double& v : x) v += 100.0;
  const auto s = welch_psd(x);
  EXPECT_LT(s.power[0], 1e-6 * s.power[9]);
  EXPECT_THROW(welch_psd(std::vector<double>(100, 0.0)), Error);
  EXPECT_TRUE(main_frequencies(welch_psd(std::vector<double>(1280, 0.0))).empty());
}

// Model whose first block passes the planted kernel straight through.
model::TrainedModel planted_model(double hz) {
  auto cfg = model::desk_config(3);
  auto m = model::build(cfg);
  auto& conv = std::get<nn::Conv2d>(m.net.layer(0));
  std::fill(conv.kernel.values.begin(), conv.kernel.values.end(), 0.0);
  std::fill(conv.bias.values.begin(), conv.bias.values.end(), 0.0);
  const size_t kt = conv.k_t(), kc = conv.k_c(), of = conv.out_f();
  for (size_t t = 0; t < kt; ++t) {
    for (size_t c = 0; c < kc; ++c) {
      conv.kernel.values[(t * kc + c) * of + 0] = std::sin(2 * std::numbers::pi * hz * t / 256.0);
    }
  }
  conv.bias.values[1] = -1.0;  // filter 1 never fires
  auto& bn = std::get<nn::BatchNorm>(m.net.layer(1));
  std::fill(bn.gamma.values.begin(), bn.gamma.values.end(), 1.0);
  std::fill(bn.beta.values.begin(), bn.beta.values.end(), 0.0);
  std::fill(bn.running_mean.values.begin(), bn.running_mean.values.end(), 0.0);
  std::fill(bn.running_var.values.begin(), bn.running_var.values.end(), 1.0);
  return m;
}

TEST(MaximizeTest, RecoversPlantedFrequency) {
  const auto m = planted_model(10.0);
  const size_t layer = model::first_relu_index(m);
  const auto r = maximize_input(m, layer, 0, 1.0, 42);
  EXPECT_FALSE(r.dead_filter);
  EXPECT_EQ(r.steps_run, 80u);
  EXPECT_GT(r.objective, r.initial_objective);
  EXPECT_EQ(r.objective, filter_objective(m.net, layer, 0, r.signal));
  for (const auto& f : r.main_frequencies) {
    ASSERT_FALSE(f.empty());
    EXPECT_NEAR(f.front(), 10.0, 1.0);
  }
  const auto again = maximize_input(m, layer, 0, 1.0, 42);
  EXPECT_EQ(again.signal, r.signal);
}

TEST(MaximizeTest, InputRenormKeepsTheInitialScale) {
  const auto m = planted_model(10.0);
  MaximizeOptions o;
  o.norm = StepNorm::kInputRenorm;
  o.steps = 20;
  const auto r = maximize_input(m, model::first_relu_index(m), 0, 2.0, 1, o);
  double ss = 0.0;
  for (double v : r.signal) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / r.signal.size()), 2.0 / std::sqrt(3.0), 0.05);
  EXPECT_GT(r.objective, r.initial_objective);
  EXPECT_EQ(step_norm_from_string(to_string(StepNorm::kInputRenorm)), StepNorm::kInputRenorm);
}

TEST(MaximizeTest, DeadFilterIsFlagged) {
  const auto m = planted_model(10.0);
  const auto r = maximize_input(m, model::first_relu_index(m), 1, 1.0, 42);
  EXPECT_TRUE(r.dead_filter);
  EXPECT_LT(r.steps_run, 80u);
  EXPECT_EQ(r.objective, 0.0);
}

TEST(MaximizeTest, TargetValidation) {
  const auto m = planted_model(10.0);
  EXPECT_THROW(maximize_input(m, 0, 0, 1.0, 1), Error);
  EXPECT_THROW(maximize_input(m, 2, 99, 1.0, 1), Error);
  EXPECT_THROW(maximize_input(m, 2, 0, -1.0, 1), Error);
}

TEST(RankFiltersTest, SortedAndComplete) {
  const auto m = planted_model(10.0);
  MaximizeOptions o;
  o.steps = 10;
  const auto ranked = rank_filters(m, model::first_relu_index(m), 1.0, 7, o);
  ASSERT_EQ(ranked.size(), m.config.filters[0]);
  std::vector<bool> seen(ranked.size(), false);
  for (size_t i = 0; i < ranked.size(); ++i) {
    seen[ranked[i].filter] = true;
    if (i > 0) EXPECT_GE(ranked[i - 1].objective, ranked[i].objective);
  }
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  const auto single = maximize_input(m, model::first_relu_index(m), ranked[0].filter, 1.0, 7, o);
  EXPECT_EQ(single.signal, ranked[0].signal);

  const std::string report = maximized_report_csv(ranked);
  EXPECT_EQ(report.substr(0, report.find('\n')),
            "filter_idx,F7-T7,F8-T8,T7-P7,T8-P8,pred,loss,init_amp_uv,dead_filter");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), static_cast<long>(ranked.size() + 1));
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

TEST(DeepliftTest, InputEqualToBaselineGivesZero) {
  const auto m = model::build(model::desk_config(2));
  Rng rng(3);
  std::vector<double> x(1280 * 4);
  for (double& v : x) v = rng.normal();
  const auto a = deeplift(m.net, {1, 1280, 4, 1}, x, x);
  EXPECT_EQ(a.delta, 0.0);
  for (double v : a.shap) EXPECT_EQ(v, 0.0);
}

TEST(DeepliftTest, LinearNetworkMatchesInputTimesGradient) {
  nn::Network net;
  Rng rng(5);
  nn::Conv2d conv(3, 2, 1, 2);
  for (double& v : conv.kernel.values) v = rng.normal();
  for (double& v : conv.bias.values) v = rng.normal();
  nn::Dense dense(16 * 2 * 2, 1);
  for (double& v : dense.weight.values) v = rng.normal();
  net.add(conv);
  net.add(dense);
  net.add(nn::Sigmoid{});
  const Shape shape{1, 16, 2, 1};
  std::vector<double> x(32);
  for (double& v : x) v = rng.normal();

  nn::Tape tape;
  const nn::Tensor in(shape, x);
  net.forward(in, nn::Mode::kInfer, nullptr, &tape, 2);
  const auto grad = net.backward(tape, nn::Tensor({1, 1, 1, 1}, 1.0), nn::Mode::kInfer);

  const auto a = deeplift(net, shape, x, {}, Target::kLogit);
  for (size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a.shap[i], x[i] * grad.values()[i], 1e-12);
  EXPECT_NEAR(sum(a.shap), a.delta, 1e-12);
}

TEST(DeepliftTest, SummationToDelta) {
  auto m = model::build(model::desk_config(9));
  for (size_t i = 0; i < m.net.size(); ++i) {
    if (auto* bn = std::get_if<nn::BatchNorm>(&m.net.layer(i))) {
      Rng rng(i);
      for (double& v : bn->running_mean.values) v = 0.1 * rng.normal();
      for (double& v : bn->beta.values) v = 0.1 * rng.normal();
    }
  }
  Rng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> x(1280 * 4);
    for (double& v : x) v = 20.0 * rng.normal();
    for (auto target : {Target::kProbability, Target::kLogit}) {
      const auto a = deeplift(m, x, target);
      EXPECT_NEAR(sum(a.shap), a.delta, 1e-6 * std::max(1.0, std::abs(a.delta)));
      EXPECT_NEAR(a.output - a.reference, a.delta, 1e-15);
    }
    EXPECT_NEAR(deeplift(m, x).output, model::predict(m, x), 1e-12);
  }
}

TEST(DeepliftTest, ShapeErrors) {
  const auto m = model::build(model::desk_config(2));
  EXPECT_THROW(deeplift(m, std::vector<double>(10, 0.0)), Error);
  EXPECT_THROW(deeplift(m.net, {1, 1280, 4, 1}, std::vector<double>(5120, 0.0), std::vector<double>(4, 0.0)), Error);
}

AttributionMap planted_map(size_t from, size_t to, size_t ch) {
  AttributionMap a;
  a.shap.assign(1280 * 4, 0.0);
  for (size_t i = from; i < to; ++i) a.shap[i * 4 + ch] = 1.0;
  a.shap[5 * 4 + 3] = -4.0;
  a.normalization = 4.0;
  return a;
}

TEST(RenderTest, SmoothingWindow) {
  const auto a = planted_map(600, 700, 2);
  const auto s = smoothed_positive(a, 2);
  ASSERT_EQ(s.size(), 1280u);
  EXPECT_DOUBLE_EQ(s[650], 0.25);
  EXPECT_EQ(s[500], 0.0);
  EXPECT_GT(s[590], 0.0);
  for (double v : smoothed_positive(a, 3)) EXPECT_EQ(v, 0.0);
}

TEST(RenderTest, BandsStayOnTheirChannel) {
  const auto a = planted_map(600, 700, 2);
  const std::string svg = attribution_svg(a, std::vector<double>(1280 * 4, 0.0));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("class=\"band\" data-channel=\"2\""), std::string::npos);
  for (const char* ch : {"0", "1", "3"}) {
    EXPECT_EQ(svg.find(std::string("class=\"band\" data-channel=\"") + ch + "\""), std::string::npos);
  }
}

TEST(RenderTest, CsvRoundTripsExactly) {
  Rng rng(12);
  AttributionMap a;
  a.shap.resize(1280 * 4);
  for (double& v : a.shap) v = rng.normal() * 1e-3;
  const std::string csv = attribution_csv(a);
  const auto lines = split(csv, '\n');
  EXPECT_EQ(lines[0], "sample,F7-T7,F8-T8,T7-P7,T8-P8");
  ASSERT_EQ(lines.size(), 1282u);
  for (size_t i = 0; i < 1280; ++i) {
    const auto cells = split(lines[i + 1], ',');
    ASSERT_EQ(cells.size(), 5u);
    for (size_t ch = 0; ch < 4; ++ch) EXPECT_EQ(std::stod(cells[ch + 1]), a.shap[i * 4 + ch]);
  }
}

TEST(RenderTest, WritesFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "seizure_render_test";
  std::filesystem::create_directories(dir);
  render_attribution(planted_map(10, 20, 0), std::vector<double>(1280 * 4, 1.0), dir / "a.svg");
  EXPECT_TRUE(std::filesystem::exists(dir / "a.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a.csv"));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace seizure::interpret
