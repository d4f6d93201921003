#pragma once

#include <functional>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "seizure/nn/layers.hpp"

namespace seizure::nn {

using Layer = std::variant<Conv2d, BatchNorm, Relu, MaxPool, Dropout, Dense, Sigmoid>;

LayerKind kind_of(const Layer& layer);

// Activations of one forward pass: activations[0] is the input and
// activations[i + 1] the output of layer i.
struct Tape {
  std::vector<Tensor> activations;
  std::vector<LayerCache> caches;
};

using NetworkGrads = std::vector<LayerGrads>;

class Network {
 public:
  static constexpr size_t kAll = std::numeric_limits<size_t>::max();

  void add(Layer layer) { layers_.push_back(std::move(layer)); }
  size_t size() const { return layers_.size(); }
  const Layer& layer(size_t i) const { return layers_[i]; }
  Layer& layer(size_t i) { return layers_[i]; }
  const std::vector<Layer>& layers() const { return layers_; }

  Shape output_shape(Shape in, size_t end = kAll) const;

  // Runs layers [0, end). Train mode requires an rng when dropout is present.
  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr, Tape* tape = nullptr,
                 size_t end = kAll) const;
  // Backpropagates `grad_out` (gradient w.r.t. the tape's last activation)
  // down to the input. Parameter gradients are accumulated when `grads` is set.
  Tensor backward(const Tape& tape, const Tensor& grad_out, Mode mode,
                  NetworkGrads* grads = nullptr) const;
  void commit_statistics(const Tape& tape);

  NetworkGrads zero_grads() const;
  // Trainable blocks in network order; matches the flattening of NetworkGrads.
  std::vector<ParamBlock*> trainable_params();
  std::vector<const ParamBlock*> trainable_params() const;
  // Blocks subject to the kernel/bias penalty (conv and dense layers).
  std::vector<const ParamBlock*> regularized_params() const;
  // Every persisted block, trainable and running statistics, in network order.
  std::vector<ParamBlock*> all_blocks();
  std::vector<const ParamBlock*> all_blocks() const;

 private:
  std::vector<Layer> layers_;
};

struct LossResult {
  double total = 0.0;
  double bce = 0.0;
  double penalty = 0.0;
  // d(total)/d(prob) per batch item; zero where the clamp is active.
  std::vector<double> grad_probs;
};

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy over the batch plus lambda * sum of squared conv
// and dense kernel and bias entries.
LossResult bce_loss_with_l2(std::span<const double> probs, std::span<const double> labels,
                            const Network& net, double lambda);
double l2_penalty(const Network& net, double lambda);
// Adds d(penalty)/d(param) to `grads`.
void add_l2_gradient(const Network& net, double lambda, NetworkGrads& grads);

// Plain SGD: p <- p - lr * g. Throws on a non-finite gradient.
void sgd_step(Network& net, const NetworkGrads& grads, double lr);
void sgd_step(std::span<ParamBlock* const> params, std::span<const std::vector<double>> grads, double lr);

// Max entrywise relative error between `analytic` and the central-difference
// gradient of `objective` at `x`; the denominator has a 1e-8 floor.
double finite_diff_check(const std::function<double(std::span<const double>)>& objective,
                         std::span<const double> x, std::span<const double> analytic,
                         double h = 1e-6);

}  // namespace seizure::nn
