#include "seizure/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace seizure::nn {

LayerKind kind_of(const Layer& layer) {
  return std::visit([](const auto& l) { return std::decay_t<decltype(l)>::kind; }, layer);
}

Shape Network::output_shape(Shape in, size_t end) const {
  end = std::min(end, layers_.size());
  for (size_t i = 0; i < end; ++i) {
    in = std::visit([&](const auto& l) { return l.output_shape(in); }, layers_[i]);
  }
  return in;
}

Tensor Network::forward(const Tensor& x, Mode mode, Rng* rng, Tape* tape, size_t end) const {
  end = std::min(end, layers_.size());
  if (tape != nullptr) {
    tape->activations.clear();
    tape->caches.assign(end, {});
    tape->activations.reserve(end + 1);
    tape->activations.push_back(x);
  }
  Tensor current = x;
  LayerCache scratch;
  for (size_t i = 0; i < end; ++i) {
    LayerCache& cache = tape != nullptr ? tape->caches[i] : scratch;
    current = std::visit([&](const auto& l) { return l.forward(current, mode, cache, rng); }, layers_[i]);
    if (tape != nullptr) tape->activations.push_back(current);
  }
  return current;
}

Tensor Network::backward(const Tape& tape, const Tensor& grad_out, Mode mode, NetworkGrads* grads) const {
  const size_t end = tape.activations.size() - 1;
  Tensor grad = grad_out;
  for (size_t i = end; i-- > 0;) {
    LayerGrads* lg = grads != nullptr ? &(*grads)[i] : nullptr;
    grad = std::visit(
        [&](const auto& l) {
          return l.backward(tape.activations[i], tape.activations[i + 1], grad, mode, tape.caches[i], lg);
        },
        layers_[i]);
  }
  return grad;
}

void Network::commit_statistics(const Tape& tape) {
  for (size_t i = 0; i < tape.caches.size() && i < layers_.size(); ++i) {
    if (auto* bn = std::get_if<BatchNorm>(&layers_[i])) bn->commit_statistics(tape.caches[i]);
  }
}

NetworkGrads Network::zero_grads() const {
  NetworkGrads grads(layers_.size());
  for (size_t i = 0; i < layers_.size(); ++i) {
    std::visit(
        [&](const auto& l) {
          for (const ParamBlock* p : l.trainable()) grads[i].emplace_back(p->values.size(), 0.0);
        },
        layers_[i]);
  }
  return grads;
}

std::vector<ParamBlock*> Network::trainable_params() {
  std::vector<ParamBlock*> out;
  for (auto& layer : layers_) {
    std::visit([&](auto& l) { for (ParamBlock* p : l.trainable()) out.push_back(p); }, layer);
  }
  return out;
}

std::vector<const ParamBlock*> Network::trainable_params() const {
  std::vector<const ParamBlock*> out;
  for (const auto& layer : layers_) {
    std::visit([&](const auto& l) { for (const ParamBlock* p : l.trainable()) out.push_back(p); }, layer);
  }
  return out;
}

std::vector<const ParamBlock*> Network::regularized_params() const {
  std::vector<const ParamBlock*> out;
  for (const auto& layer : layers_) {
    if (const auto* c = std::get_if<Conv2d>(&layer)) {
      out.push_back(&c->kernel);
      out.push_back(&c->bias);
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      out.push_back(&d->weight);
      out.push_back(&d->bias);
    }
  }
  return out;
}

std::vector<ParamBlock*> Network::all_blocks() {
  std::vector<ParamBlock*> out;
  for (auto& layer : layers_) {
    std::visit(
        [&](auto& l) {
          for (ParamBlock* p : l.trainable()) out.push_back(p);
          for (ParamBlock* p : l.state()) out.push_back(p);
        },
        layer);
  }
  return out;
}

std::vector<const ParamBlock*> Network::all_blocks() const {
  auto blocks = const_cast<Network*>(this)->all_blocks();
  return {blocks.begin(), blocks.end()};
}

// ---------------------------------------------------------------------------

double l2_penalty(const Network& net, double lambda) {
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (const ParamBlock* p : net.regularized_params()) {
    for (double v : p->values) sum += v * v;
  }
  return lambda * sum;
}

void add_l2_gradient(const Network& net, double lambda, NetworkGrads& grads) {
  if (lambda == 0.0) return;
  for (size_t i = 0; i < net.size(); ++i) {
    const auto* conv = std::get_if<Conv2d>(&net.layer(i));
    const auto* dense = std::get_if<Dense>(&net.layer(i));
    if (conv == nullptr && dense == nullptr) continue;
    const ParamBlock& w = conv ? conv->kernel : dense->weight;
    const ParamBlock& b = conv ? conv->bias : dense->bias;
    for (size_t k = 0; k < w.values.size(); ++k) grads[i][0][k] += 2.0 * lambda * w.values[k];
    for (size_t k = 0; k < b.values.size(); ++k) grads[i][1][k] += 2.0 * lambda * b.values[k];
  }
}

LossResult bce_loss_with_l2(std::span<const double> probs, std::span<const double> labels,
                            const Network& net, double lambda) {
  if (probs.size() != labels.size() || probs.empty()) {
    throw Error(ErrorCode::kShape, "loss needs equal, non-empty prob and label lists");
  }
  LossResult r;
  r.grad_probs.resize(probs.size());
  const double n = static_cast<double>(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    const double raw = probs[i];
    const double p = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
    const double y = labels[i];
    r.bce -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    const bool clamped = raw < kProbClamp || raw > 1.0 - kProbClamp;
    r.grad_probs[i] = clamped ? 0.0 : (-y / p + (1.0 - y) / (1.0 - p)) / n;
  }
  r.bce /= n;
  r.penalty = l2_penalty(net, lambda);
  r.total = r.bce + r.penalty;
  return r;
}

void sgd_step(std::span<ParamBlock* const> params, std::span<const std::vector<double>> grads, double lr) {
  if (params.size() != grads.size()) throw Error(ErrorCode::kShape, "sgd: params/grads count mismatch");
  for (size_t b = 0; b < params.size(); ++b) {
    if (params[b]->values.size() != grads[b].size()) {
      throw Error(ErrorCode::kShape, "sgd: shape mismatch in block '" + params[b]->name + "'");
    }
    for (size_t k = 0; k < grads[b].size(); ++k) {
      if (!std::isfinite(grads[b][k])) {
        std::ostringstream msg;
        msg << "non-finite gradient in block " << b << " ('" << params[b]->name << "') at entry " << k;
        throw Error(ErrorCode::kDivergence, msg.str());
      }
    }
  }
  for (size_t b = 0; b < params.size(); ++b) {
    auto& v = params[b]->values;
    for (size_t k = 0; k < v.size(); ++k) v[k] -= lr * grads[b][k];
  }
}

void sgd_step(Network& net, const NetworkGrads& grads, double lr) {
  std::vector<ParamBlock*> params = net.trainable_params();
  std::vector<std::vector<double>> flat;
  flat.reserve(params.size());
  for (const auto& lg : grads) {
    for (const auto& g : lg) flat.push_back(g);
  }
  sgd_step(params, flat, lr);
}

double finite_diff_check(const std::function<double(std::span<const double>)>& objective,
                         std::span<const double> x, std::span<const double> analytic, double h) {
  if (x.size() != analytic.size()) throw Error(ErrorCode::kShape, "gradient check size mismatch");
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = objective(probe);
    probe[i] = orig - h;
    const double down = objective(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace seizure::nn
