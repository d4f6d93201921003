#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace seizure::nn {

// Batch of (time, channel, feature) maps; feature is the fastest axis.
struct Shape {
  size_t n = 1;
  size_t t = 1;
  size_t c = 1;
  size_t f = 1;

  size_t sample_size() const { return t * c * f; }
  size_t size() const { return n * sample_size(); }
  bool operator==(const Shape&) const = default;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& at(size_t n, size_t t, size_t c, size_t f) {
    return data_[((n * shape_.t + t) * shape_.c + c) * shape_.f + f];
  }
  double at(size_t n, size_t t, size_t c, size_t f) const {
    return data_[((n * shape_.t + t) * shape_.c + c) * shape_.f + f];
  }

  std::span<double> sample(size_t n) {
    return std::span<double>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }
  std::span<const double> sample(size_t n) const {
    return std::span<const double>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }

  bool all_finite() const;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

}  // namespace seizure::nn
