#include <algorithm>
#include <cmath>

#include "seizure/interpret.hpp"

namespace seizure::interpret {

namespace {

using nn::LayerKind;
using nn::Mode;
using nn::Tensor;

constexpr double kRescaleFloor = 1e-7;

void check_finite(const Tensor& t, size_t layer, const char* what) {
  if (!t.all_finite()) {
    throw Error(ErrorCode::kNumeric, std::string("non-finite ") + what + " at layer " + std::to_string(layer));
  }
}

// Elementwise nonlinearity: multiplier = dy/dx, or the local derivative when
// the input barely moves.
Tensor rescale(const Tensor& m_out, const Tensor& x, const Tensor& x0, const Tensor& y, const Tensor& y0,
               LayerKind kind) {
  Tensor m_in(x.shape());
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x.data()[i] - x0.data()[i];
    double slope;
    if (std::abs(dx) >= kRescaleFloor) {
      slope = (y.data()[i] - y0.data()[i]) / dx;
    } else if (kind == LayerKind::kRelu) {
      slope = x.data()[i] > 0.0 ? 1.0 : 0.0;
    } else {
      slope = y.data()[i] * (1.0 - y.data()[i]);
    }
    m_in.data()[i] = m_out.data()[i] * slope;
  }
  return m_in;
}

// Each pooled difference goes to the winning position of the actual input.
// If that position did not move, the difference is shared by the window
// positions that did; if none moved, the difference is zero.
Tensor route_max(const nn::MaxPool& pool, const Tensor& m_out, const Tensor& x, const Tensor& x0, const Tensor& y,
                 const Tensor& y0) {
  Tensor m_in(x.shape(), 0.0);
  const nn::Shape s = x.shape();
  const nn::Shape o = y.shape();
  const size_t row = s.c * s.f;
  const auto winners = pool.argmax(x);
  std::vector<size_t> moved;
  for (size_t j = 0; j < winners.size(); ++j) {
    const size_t a = winners[j];
    const double dy = y.data()[j] - y0.data()[j];
    const double dx = x.data()[a] - x0.data()[a];
    if (std::abs(dx) >= kRescaleFloor) {
      m_in.data()[a] += m_out.data()[j] * dy / dx;
      continue;
    }
    const size_t n = j / (o.t * row);
    const size_t ot = (j / row) % o.t;
    const size_t k = j % row;
    moved.clear();
    for (size_t t = ot * pool.pool_t; t < std::min((ot + 1) * pool.pool_t, s.t); ++t) {
      const size_t i = (n * s.t + t) * row + k;
      if (std::abs(x.data()[i] - x0.data()[i]) >= kRescaleFloor) moved.push_back(i);
    }
    if (moved.empty()) {
      m_in.data()[a] += m_out.data()[j];
      continue;
    }
    const double share = dy / static_cast<double>(moved.size());
    for (size_t i : moved) m_in.data()[i] += m_out.data()[j] * share / (x.data()[i] - x0.data()[i]);
  }
  return m_in;
}

}  // namespace

AttributionMap deeplift(const nn::Network& net, nn::Shape sample_shape, std::span<const double> input,
                        std::span<const double> baseline, Target target) {
  sample_shape.n = 1;
  if (input.size() != sample_shape.size()) throw Error(ErrorCode::kShape, "attribution input has the wrong size");
  std::vector<double> ref(baseline.begin(), baseline.end());
  if (ref.empty()) ref.assign(input.size(), 0.0);
  if (ref.size() != input.size()) throw Error(ErrorCode::kShape, "baseline and input differ in size");

  size_t end = net.size();
  if (target == Target::kLogit && end > 0 && nn::kind_of(net.layer(end - 1)) == LayerKind::kSigmoid) --end;
  if (net.output_shape(sample_shape, end).sample_size() != 1) {
    throw Error(ErrorCode::kShape, "attribution target must be a single output unit");
  }

  nn::Tape tx, t0;
  net.forward(Tensor(sample_shape, std::vector<double>(input.begin(), input.end())), Mode::kInfer, nullptr, &tx, end);
  net.forward(Tensor(sample_shape, ref), Mode::kInfer, nullptr, &t0, end);
  for (size_t i = 0; i <= end; ++i) {
    check_finite(tx.activations[i], i, "activation");
    check_finite(t0.activations[i], i, "reference activation");
  }

  Tensor m(tx.activations[end].shape(), 1.0);
  for (size_t i = end; i-- > 0;) {
    const Tensor& x = tx.activations[i];
    const Tensor& x0 = t0.activations[i];
    const Tensor& y = tx.activations[i + 1];
    const Tensor& y0 = t0.activations[i + 1];
    const nn::Layer& layer = net.layer(i);
    switch (nn::kind_of(layer)) {
      case LayerKind::kRelu:
      case LayerKind::kSigmoid:
        m = rescale(m, x, x0, y, y0, nn::kind_of(layer));
        break;
      case LayerKind::kMaxPool:
        m = route_max(std::get<nn::MaxPool>(layer), m, x, x0, y, y0);
        break;
      default:
        // Affine in infer mode: multipliers are the plain gradient.
        m = std::visit([&](const auto& l) { return l.backward(x, y, m, Mode::kInfer, tx.caches[i], nullptr); },
                       layer);
        break;
    }
    check_finite(m, i, "multiplier");
  }

  AttributionMap map;
  map.shap.resize(input.size());
  for (size_t i = 0; i < input.size(); ++i) map.shap[i] = m.data()[i] * (input[i] - ref[i]);
  map.output = tx.activations[end].data()[0];
  map.reference = t0.activations[end].data()[0];
  map.delta = map.output - map.reference;
  for (double v : map.shap) map.normalization = std::max(map.normalization, std::abs(v));
  return map;
}

AttributionMap deeplift(const model::TrainedModel& model, std::span<const double> segment, Target target) {
  return deeplift(model.net, {1, eeg::kWindowLen, eeg::kNumChannels, 1}, segment, {}, target);
}

}  // namespace seizure::interpret
