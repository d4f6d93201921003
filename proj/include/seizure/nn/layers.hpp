#pragma once

#include <span>
#include <string>
#include <vector>

#include "seizure/common.hpp"
#include "seizure/nn/tensor.hpp"

namespace seizure::nn {

enum class Mode { kTrain, kInfer };

enum class LayerKind { kConv, kBatchNorm, kRelu, kMaxPool, kDropout, kDense, kSigmoid };
std::string_view to_string(LayerKind kind);

struct ParamBlock {
  std::string name;
  std::vector<size_t> dims;
  std::vector<double> values;
};

// Scratch written by forward and read by backward (dropout mask, BN batch stats).
struct LayerCache {
  std::vector<double> aux;
};

// Gradient buffers, one per trainable block of a layer.
using LayerGrads = std::vector<std::vector<double>>;

// Same-padded 2-D convolution over (time, channel), stride 1.
// Kernel layout [k_t][k_c][in_f][out_f].
class Conv2d {
 public:
  Conv2d(size_t k_t, size_t k_c, size_t in_f, size_t out_f);

  static constexpr LayerKind kind = LayerKind::kConv;
  size_t k_t() const { return kernel.dims[0]; }
  size_t k_c() const { return kernel.dims[1]; }
  size_t in_f() const { return kernel.dims[2]; }
  size_t out_f() const { return kernel.dims[3]; }

  Shape output_shape(const Shape& in) const;
  Tensor forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  const LayerCache& cache, LayerGrads* grads) const;
  std::vector<ParamBlock*> trainable() { return {&kernel, &bias}; }
  std::vector<const ParamBlock*> trainable() const { return {&kernel, &bias}; }
  std::vector<ParamBlock*> state() { return {}; }

  ParamBlock kernel;
  ParamBlock bias;
};

// Normalizes each feature map over (batch, time, channel).
class BatchNorm {
 public:
  explicit BatchNorm(size_t features, double epsilon = 1e-5, double momentum = 0.9);

  static constexpr LayerKind kind = LayerKind::kBatchNorm;
  size_t features() const { return gamma.values.size(); }

  Shape output_shape(const Shape& in) const { return in; }
  Tensor forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  const LayerCache& cache, LayerGrads* grads) const;
  // Folds the batch statistics of a train-mode forward into the running stats.
  void commit_statistics(const LayerCache& cache);
  std::vector<ParamBlock*> trainable() { return {&gamma, &beta}; }
  std::vector<const ParamBlock*> trainable() const { return {&gamma, &beta}; }
  std::vector<ParamBlock*> state() { return {&running_mean, &running_var}; }

  ParamBlock gamma;
  ParamBlock beta;
  ParamBlock running_mean;
  ParamBlock running_var;
  double epsilon;
  double momentum;
};

class Relu {
 public:
  static constexpr LayerKind kind = LayerKind::kRelu;
  Shape output_shape(const Shape& in) const { return in; }
  Tensor forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  const LayerCache& cache, LayerGrads* grads) const;
  std::vector<ParamBlock*> trainable() { return {}; }
  std::vector<const ParamBlock*> trainable() const { return {}; }
  std::vector<ParamBlock*> state() { return {}; }
};

// Max over non-overlapping windows along time only. A ragged tail is padded
// with -inf.
class MaxPool {
 public:
  explicit MaxPool(size_t pool_t) : pool_t(pool_t) {}

  static constexpr LayerKind kind = LayerKind::kMaxPool;
  Shape output_shape(const Shape& in) const;
  Tensor forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  const LayerCache& cache, LayerGrads* grads) const;
  // Index into `in` of the winning element for every output element.
  std::vector<size_t> argmax(const Tensor& in) const;
  std::vector<ParamBlock*> trainable() { return {}; }
  std::vector<const ParamBlock*> trainable() const { return {}; }
  std::vector<ParamBlock*> state() { return {}; }

  size_t pool_t;
};

// Inverted dropout: kept activations are scaled by 1/(1-rate) in train mode.
class Dropout {
 public:
  explicit Dropout(double rate);

  static constexpr LayerKind kind = LayerKind::kDropout;
  Shape output_shape(const Shape& in) const { return in; }
  Tensor forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  const LayerCache& cache, LayerGrads* grads) const;
  std::vector<ParamBlock*> trainable() { return {}; }
  std::vector<const ParamBlock*> trainable() const { return {}; }
  std::vector<ParamBlock*> state() { return {}; }

  double rate;
};

// Fully connected layer over the flattened sample; weight layout [in][out].
class Dense {
 public:
  Dense(size_t in_units, size_t out_units);

  static constexpr LayerKind kind = LayerKind::kDense;
  size_t in_units() const { return weight.dims[0]; }
  size_t out_units() const { return weight.dims[1]; }

  Shape output_shape(const Shape& in) const;
  Tensor forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  const LayerCache& cache, LayerGrads* grads) const;
  std::vector<ParamBlock*> trainable() { return {&weight, &bias}; }
  std::vector<const ParamBlock*> trainable() const { return {&weight, &bias}; }
  std::vector<ParamBlock*> state() { return {}; }

  ParamBlock weight;
  ParamBlock bias;
};

class Sigmoid {
 public:
  static constexpr LayerKind kind = LayerKind::kSigmoid;
  Shape output_shape(const Shape& in) const { return in; }
  Tensor forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  const LayerCache& cache, LayerGrads* grads) const;
  std::vector<ParamBlock*> trainable() { return {}; }
  std::vector<const ParamBlock*> trainable() const { return {}; }
  std::vector<ParamBlock*> state() { return {}; }
};

double sigmoid(double logit);

}  // namespace seizure::nn
