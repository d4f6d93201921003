#include <algorithm>
#include <cmath>

#include "seizure/interpret.hpp"

namespace seizure::interpret {

namespace {

using nn::Mode;
using nn::Shape;
using nn::Tensor;

Shape sample_shape() { return {1, eeg::kWindowLen, eeg::kNumChannels, 1}; }

double rms(std::span<const double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  return std::sqrt(ss / static_cast<double>(v.size()));
}

void check_target(const nn::Network& net, size_t layer, size_t filter) {
  if (layer >= net.size() || nn::kind_of(net.layer(layer)) != nn::LayerKind::kRelu) {
    throw Error(ErrorCode::kInvalidInput, "layer " + std::to_string(layer) + " is not a ReLU output");
  }
  const Shape out = net.output_shape(sample_shape(), layer + 1);
  if (filter >= out.f) {
    throw Error(ErrorCode::kInvalidInput, "filter " + std::to_string(filter) + " out of range (layer has " +
                                              std::to_string(out.f) + ")");
  }
}

// Objective and its input gradient.
double objective_and_gradient(const nn::Network& net, size_t layer, size_t filter, std::span<const double> x,
                              std::vector<double>* grad) {
  nn::Tape tape;
  const Tensor in(sample_shape(), std::vector<double>(x.begin(), x.end()));
  const Tensor out = net.forward(in, Mode::kInfer, nullptr, grad ? &tape : nullptr, layer + 1);
  const Shape s = out.shape();
  const double scale = 1.0 / static_cast<double>(s.t * s.c);
  double sum = 0.0;
  for (size_t t = 0; t < s.t; ++t) {
    for (size_t c = 0; c < s.c; ++c) sum += out.at(0, t, c, filter);
  }
  if (grad != nullptr) {
    Tensor g(s, 0.0);
    for (size_t t = 0; t < s.t; ++t) {
      for (size_t c = 0; c < s.c; ++c) g.at(0, t, c, filter) = scale;
    }
    const Tensor gin = net.backward(tape, g, Mode::kInfer);
    grad->assign(gin.values().begin(), gin.values().end());
  }
  return sum * scale;
}

}  // namespace

std::string_view to_string(StepNorm n) { return n == StepNorm::kGradientRms ? "gradient_rms" : "input_renorm"; }

StepNorm step_norm_from_string(std::string_view name) {
  if (name == "gradient_rms") return StepNorm::kGradientRms;
  if (name == "input_renorm") return StepNorm::kInputRenorm;
  throw Error(ErrorCode::kInvalidInput, "unknown normalization '" + std::string(name) + "'");
}

double filter_objective(const nn::Network& net, size_t layer, size_t filter, std::span<const double> signal) {
  check_target(net, layer, filter);
  return objective_and_gradient(net, layer, filter, signal, nullptr);
}

MaximizedInput maximize_input(const model::TrainedModel& model, size_t layer, size_t filter, double init_amp_uv,
                              uint64_t seed, const MaximizeOptions& options) {
  const nn::Network& net = model.net;
  check_target(net, layer, filter);
  if (init_amp_uv < 0.0) throw Error(ErrorCode::kInvalidInput, "init amplitude must be non-negative");

  MaximizedInput r;
  r.filter = filter;
  r.layer = layer;
  r.init_amp_uv = init_amp_uv;
  r.signal.resize(sample_shape().size());
  Rng rng = Rng(seed).fork(filter);
  for (double& v : r.signal) v = init_amp_uv * (2.0 * rng.uniform() - 1.0);
  const double init_rms = rms(r.signal);

  std::vector<double> grad;
  r.initial_objective = objective_and_gradient(net, layer, filter, r.signal, &grad);
  size_t zero_run = 0;
  for (size_t step = 0; step < options.steps; ++step) {
    if (step > 0) objective_and_gradient(net, layer, filter, r.signal, &grad);
    const double g_rms = rms(grad);
    if (g_rms == 0.0) {
      if (++zero_run >= options.dead_after) {
        r.dead_filter = true;
        break;
      }
    } else {
      zero_run = 0;
    }
    if (options.norm == StepNorm::kGradientRms) {
      const double scale = options.step_size / std::max(g_rms, 1e-12);
      for (size_t i = 0; i < grad.size(); ++i) r.signal[i] += scale * grad[i];
    } else {
      for (size_t i = 0; i < grad.size(); ++i) r.signal[i] += options.step_size * grad[i];
      const double now = rms(r.signal);
      if (init_rms > 0.0 && now > 0.0) {
        for (double& v : r.signal) v *= init_rms / now;
      }
    }
    r.steps_run = step + 1;
  }
  r.objective = objective_and_gradient(net, layer, filter, r.signal, nullptr);
  r.pred = model::predict(model, r.signal);
  for (size_t ch = 0; ch < eeg::kNumChannels; ++ch) {
    r.main_frequencies[ch] = main_frequencies(welch_psd(channel(r.signal, ch)));
  }
  return r;
}

std::vector<MaximizedInput> rank_filters(const model::TrainedModel& model, size_t layer, double init_amp_uv,
                                         uint64_t seed, const MaximizeOptions& options) {
  check_target(model.net, layer, 0);
  const size_t n = model.net.output_shape(sample_shape(), layer + 1).f;
  std::vector<MaximizedInput> out(n);
#pragma omp parallel for schedule(dynamic)
  for (size_t f = 0; f < n; ++f) out[f] = maximize_input(model, layer, f, init_amp_uv, seed, options);
  std::stable_sort(out.begin(), out.end(),
                   [](const MaximizedInput& a, const MaximizedInput& b) { return a.objective > b.objective; });
  return out;
}

}  // namespace seizure::interpret
