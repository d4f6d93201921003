#include "seizure/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seizure::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.size()) {
    throw Error(ErrorCode::kShape, "tensor payload length does not match its shape");
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(size_t k_t, size_t k_c, size_t in_f, size_t out_f) {
  if (k_t == 0 || k_c == 0 || in_f == 0 || out_f == 0) {
    throw Error(ErrorCode::kShape, "conv dimensions must be positive");
  }
  kernel = {"kernel", {k_t, k_c, in_f, out_f}, std::vector<double>(k_t * k_c * in_f * out_f, 0.0)};
  bias = {"bias", {out_f}, std::vector<double>(out_f, 0.0)};
}

Shape Conv2d::output_shape(const Shape& in) const {
  if (in.f != in_f()) {
    throw Error(ErrorCode::kShape, "conv expects " + std::to_string(in_f()) +
                                       " input features, got " + std::to_string(in.f));
  }
  return {in.n, in.t, in.c, out_f()};
}

namespace {

// Convolution runs on time-major planes: plane (c, f) holds one channel/feature
// pair as a contiguous series over time, so inner loops are long runs over t.
struct ConvGeometry {
  size_t T, C, Fin, Fout, Kt, Kc, pad_t, pad_c, Tp, Cp;

  ConvGeometry(const Conv2d& conv, const Shape& in)
      : T(in.t), C(in.c), Fin(conv.in_f()), Fout(conv.out_f()), Kt(conv.k_t()), Kc(conv.k_c()),
        pad_t((conv.k_t() - 1) / 2), pad_c((conv.k_c() - 1) / 2),
        Tp(in.t + conv.k_t() - 1), Cp(in.c + conv.k_c() - 1) {}

  size_t weight_index(size_t dt, size_t dc, size_t fi, size_t fo) const {
    return ((dt * Kc + dc) * Fin + fi) * Fout + fo;
  }
};

// Zero-padded planes [Cp][Fin][Tp] of one [T][C][Fin] sample.
void to_padded_planes(const ConvGeometry& g, std::span<const double> src, std::vector<double>& planes) {
  planes.assign(g.Cp * g.Fin * g.Tp, 0.0);
  for (size_t t = 0; t < g.T; ++t) {
    for (size_t c = 0; c < g.C; ++c) {
      for (size_t f = 0; f < g.Fin; ++f) {
        planes[((c + g.pad_c) * g.Fin + f) * g.Tp + t + g.pad_t] = src[(t * g.C + c) * g.Fin + f];
      }
    }
  }
}

// Planes [C][F][T] of one [T][C][F] sample.
void to_planes(std::span<const double> src, size_t T, size_t C, size_t F, std::vector<double>& planes) {
  planes.resize(T * C * F);
  for (size_t t = 0; t < T; ++t) {
    for (size_t c = 0; c < C; ++c) {
      for (size_t f = 0; f < F; ++f) planes[(c * F + f) * T + t] = src[(t * C + c) * F + f];
    }
  }
}

void from_planes(const std::vector<double>& planes, size_t T, size_t C, size_t F, std::span<double> dst) {
  for (size_t t = 0; t < T; ++t) {
    for (size_t c = 0; c < C; ++c) {
      for (size_t f = 0; f < F; ++f) dst[(t * C + c) * F + f] = planes[(c * F + f) * T + t];
    }
  }
}

// y[t] += sum_d w[d] * x[t + d] for t in [0, n), four taps per pass.
void correlate_accumulate(double* __restrict y, const double* __restrict x, const double* w,
                          size_t taps, size_t n) {
  size_t d = 0;
  for (; d + 4 <= taps; d += 4) {
    const double w0 = w[d], w1 = w[d + 1], w2 = w[d + 2], w3 = w[d + 3];
    const double* __restrict xd = x + d;
#pragma omp simd
    for (size_t t = 0; t < n; ++t) {
      y[t] += w0 * xd[t] + w1 * xd[t + 1] + w2 * xd[t + 2] + w3 * xd[t + 3];
    }
  }
  for (; d < taps; ++d) {
    const double wd = w[d];
    const double* __restrict xd = x + d;
#pragma omp simd
    for (size_t t = 0; t < n; ++t) y[t] += wd * xd[t];
  }
}

double dot(const double* __restrict a, const double* __restrict b, size_t n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (size_t t = 0; t < n; ++t) s += a[t] * b[t];
  return s;
}

// out[k] = sum_t x[t + k] * g[t] for k = 0..3.
void dot4(const double* __restrict x, const double* __restrict g, size_t n, double* out) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
  for (size_t t = 0; t < n; ++t) {
    const double gt = g[t];
    s0 += x[t] * gt;
    s1 += x[t + 1] * gt;
    s2 += x[t + 2] * gt;
    s3 += x[t + 3] * gt;
  }
  out[0] = s0;
  out[1] = s1;
  out[2] = s2;
  out[3] = s3;
}

}  // namespace

Tensor Conv2d::forward(const Tensor& in, Mode, LayerCache&, Rng*) const {
  const Shape out_shape = output_shape(in.shape());
  const ConvGeometry g(*this, in.shape());
  Tensor out(out_shape);
  const long n_samples = static_cast<long>(in.shape().n);

#pragma omp parallel for schedule(static)
  for (long n = 0; n < n_samples; ++n) {
    std::vector<double> xp, yp(g.C * g.Fout * g.T), taps(g.Kt);
    to_padded_planes(g, in.sample(static_cast<size_t>(n)), xp);
    for (size_t c = 0; c < g.C; ++c) {
      for (size_t fo = 0; fo < g.Fout; ++fo) {
        double* y = yp.data() + (c * g.Fout + fo) * g.T;
        std::fill(y, y + g.T, bias.values[fo]);
        for (size_t dc = 0; dc < g.Kc; ++dc) {
          for (size_t fi = 0; fi < g.Fin; ++fi) {
            for (size_t dt = 0; dt < g.Kt; ++dt) taps[dt] = kernel.values[g.weight_index(dt, dc, fi, fo)];
            const double* x = xp.data() + ((c + dc) * g.Fin + fi) * g.Tp;
            correlate_accumulate(y, x, taps.data(), g.Kt, g.T);
          }
        }
      }
    }
    from_planes(yp, g.T, g.C, g.Fout, out.sample(static_cast<size_t>(n)));
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                        const LayerCache&, LayerGrads* grads) const {
  const ConvGeometry g(*this, in.shape());
  const size_t N = in.shape().n;
  Tensor grad_in(in.shape());
  // Output-gradient planes padded by Kt-1 on both sides of time.
  const size_t Tg = g.T + 2 * (g.Kt - 1);

  std::vector<std::vector<double>> xplanes(N), gplanes(N);
  for (size_t n = 0; n < N; ++n) {
    to_padded_planes(g, in.sample(n), xplanes[n]);
    std::vector<double> gp;
    to_planes(grad_out.sample(n), g.T, g.C, g.Fout, gp);
    gplanes[n].assign(g.C * g.Fout * Tg, 0.0);
    for (size_t p = 0; p < g.C * g.Fout; ++p) {
      std::copy(gp.begin() + static_cast<std::ptrdiff_t>(p * g.T),
                gp.begin() + static_cast<std::ptrdiff_t>((p + 1) * g.T),
                gplanes[n].begin() + static_cast<std::ptrdiff_t>(p * Tg + g.Kt - 1));
    }
  }

  // Input gradient: gx[s] += sum_dt w[dt] * gy[s - dt], as a correlation with
  // the reversed taps over the padded gradient.
#pragma omp parallel for schedule(static)
  for (long ln = 0; ln < static_cast<long>(N); ++ln) {
    const size_t n = static_cast<size_t>(ln);
    std::vector<double> gxp(g.Cp * g.Fin * g.Tp, 0.0), rev(g.Kt);
    for (size_t c = 0; c < g.C; ++c) {
      for (size_t fo = 0; fo < g.Fout; ++fo) {
        const double* gy = gplanes[n].data() + (c * g.Fout + fo) * Tg;
        for (size_t dc = 0; dc < g.Kc; ++dc) {
          for (size_t fi = 0; fi < g.Fin; ++fi) {
            for (size_t j = 0; j < g.Kt; ++j) rev[j] = kernel.values[g.weight_index(g.Kt - 1 - j, dc, fi, fo)];
            double* gx = gxp.data() + ((c + dc) * g.Fin + fi) * g.Tp;
            correlate_accumulate(gx, gy, rev.data(), g.Kt, g.Tp);
          }
        }
      }
    }
    std::span<double> gi = grad_in.sample(n);
    for (size_t t = 0; t < g.T; ++t) {
      for (size_t c = 0; c < g.C; ++c) {
        for (size_t f = 0; f < g.Fin; ++f) {
          gi[(t * g.C + c) * g.Fin + f] = gxp[((c + g.pad_c) * g.Fin + f) * g.Tp + t + g.pad_t];
        }
      }
    }
  }

  if (grads != nullptr) {
    auto& dkernel = (*grads)[0];
    auto& dbias = (*grads)[1];
    // Each (dc, fi, fo) triple owns its kernel entries; samples are summed in
    // index order.
    const long triples = static_cast<long>(g.Kc * g.Fin * g.Fout);
#pragma omp parallel for schedule(static)
    for (long lw = 0; lw < triples; ++lw) {
      const size_t fo = static_cast<size_t>(lw) % g.Fout;
      const size_t fi = (static_cast<size_t>(lw) / g.Fout) % g.Fin;
      const size_t dc = static_cast<size_t>(lw) / (g.Fout * g.Fin);
      for (size_t n = 0; n < N; ++n) {
        for (size_t c = 0; c < g.C; ++c) {
          const double* gy = gplanes[n].data() + (c * g.Fout + fo) * Tg + g.Kt - 1;
          const double* x = xplanes[n].data() + ((c + dc) * g.Fin + fi) * g.Tp;
          size_t dt = 0;
          for (; dt + 4 <= g.Kt; dt += 4) {
            double s[4];
            dot4(x + dt, gy, g.T, s);
            for (size_t k = 0; k < 4; ++k) dkernel[g.weight_index(dt + k, dc, fi, fo)] += s[k];
          }
          for (; dt < g.Kt; ++dt) {
            dkernel[g.weight_index(dt, dc, fi, fo)] += dot(x + dt, gy, g.T);
          }
        }
      }
    }
    for (size_t n = 0; n < N; ++n) {
      for (size_t c = 0; c < g.C; ++c) {
        for (size_t fo = 0; fo < g.Fout; ++fo) {
          const double* gy = gplanes[n].data() + (c * g.Fout + fo) * Tg + g.Kt - 1;
          double s = 0.0;
          for (size_t t = 0; t < g.T; ++t) s += gy[t];
          dbias[fo] += s;
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(size_t features, double epsilon, double momentum)
    : epsilon(epsilon), momentum(momentum) {
  gamma = {"gamma", {features}, std::vector<double>(features, 1.0)};
  beta = {"beta", {features}, std::vector<double>(features, 0.0)};
  running_mean = {"running_mean", {features}, std::vector<double>(features, 0.0)};
  running_var = {"running_var", {features}, std::vector<double>(features, 1.0)};
}

namespace {

void check_features(const BatchNorm& bn, const Shape& s) {
  if (s.f != bn.features()) {
    throw Error(ErrorCode::kShape, "batch norm expects " + std::to_string(bn.features()) +
                                       " features, got " + std::to_string(s.f));
  }
}

}  // namespace

Tensor BatchNorm::forward(const Tensor& in, Mode mode, LayerCache& cache, Rng*) const {
  const Shape& s = in.shape();
  check_features(*this, s);
  const size_t F = s.f;
  const size_t rows = s.n * s.t * s.c;
  std::vector<double> mean(F, 0.0), var(F, 0.0);
  if (mode == Mode::kTrain) {
    if (s.n < 2) throw Error(ErrorCode::kInvalidInput, "batch norm train mode needs a batch of at least 2");
    const double* x = in.data();
    for (size_t r = 0; r < rows; ++r) {
      for (size_t f = 0; f < F; ++f) mean[f] += x[r * F + f];
    }
    for (size_t f = 0; f < F; ++f) mean[f] /= static_cast<double>(rows);
    for (size_t r = 0; r < rows; ++r) {
      for (size_t f = 0; f < F; ++f) {
        const double d = x[r * F + f] - mean[f];
        var[f] += d * d;
      }
    }
    for (size_t f = 0; f < F; ++f) var[f] /= static_cast<double>(rows);
    cache.aux.assign(mean.begin(), mean.end());
    cache.aux.insert(cache.aux.end(), var.begin(), var.end());
  } else {
    mean = running_mean.values;
    var = running_var.values;
  }
  Tensor out(s);
  std::vector<double> scale(F), shift(F);
  for (size_t f = 0; f < F; ++f) {
    scale[f] = gamma.values[f] / std::sqrt(var[f] + epsilon);
    shift[f] = beta.values[f] - mean[f] * scale[f];
  }
  const double* x = in.data();
  double* y = out.data();
  for (size_t r = 0; r < rows; ++r) {
    for (size_t f = 0; f < F; ++f) y[r * F + f] = x[r * F + f] * scale[f] + shift[f];
  }
  return out;
}

Tensor BatchNorm::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode mode,
                           const LayerCache& cache, LayerGrads* grads) const {
  const Shape& s = in.shape();
  check_features(*this, s);
  const size_t F = s.f;
  const size_t rows = s.n * s.t * s.c;
  std::vector<double> mean(F), inv_std(F);
  for (size_t f = 0; f < F; ++f) {
    const double m = mode == Mode::kTrain ? cache.aux[f] : running_mean.values[f];
    const double v = mode == Mode::kTrain ? cache.aux[F + f] : running_var.values[f];
    mean[f] = m;
    inv_std[f] = 1.0 / std::sqrt(v + epsilon);
  }
  const double* x = in.data();
  const double* g = grad_out.data();
  std::vector<double> sum_g(F, 0.0), sum_gx(F, 0.0);
  for (size_t r = 0; r < rows; ++r) {
    for (size_t f = 0; f < F; ++f) {
      const double xhat = (x[r * F + f] - mean[f]) * inv_std[f];
      sum_g[f] += g[r * F + f];
      sum_gx[f] += g[r * F + f] * xhat;
    }
  }
  if (grads != nullptr) {
    for (size_t f = 0; f < F; ++f) {
      (*grads)[0][f] += sum_gx[f];
      (*grads)[1][f] += sum_g[f];
    }
  }
  Tensor grad_in(s);
  double* gi = grad_in.data();
  if (mode == Mode::kInfer) {
    for (size_t r = 0; r < rows; ++r) {
      for (size_t f = 0; f < F; ++f) gi[r * F + f] = g[r * F + f] * gamma.values[f] * inv_std[f];
    }
    return grad_in;
  }
  const double count = static_cast<double>(rows);
  for (size_t r = 0; r < rows; ++r) {
    for (size_t f = 0; f < F; ++f) {
      const double xhat = (x[r * F + f] - mean[f]) * inv_std[f];
      gi[r * F + f] = gamma.values[f] * inv_std[f] / count *
                      (count * g[r * F + f] - sum_g[f] - xhat * sum_gx[f]);
    }
  }
  return grad_in;
}

void BatchNorm::commit_statistics(const LayerCache& cache) {
  const size_t F = features();
  if (cache.aux.size() != 2 * F) return;
  for (size_t f = 0; f < F; ++f) {
    running_mean.values[f] = momentum * running_mean.values[f] + (1.0 - momentum) * cache.aux[f];
    running_var.values[f] = momentum * running_var.values[f] + (1.0 - momentum) * cache.aux[F + f];
  }
}

// ---------------------------------------------------------------------------
// Elementwise layers

Tensor Relu::forward(const Tensor& in, Mode, LayerCache&, Rng*) const {
  Tensor out(in.shape());
  const double* x = in.data();
  double* y = out.data();
  for (size_t i = 0; i < in.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor Relu::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                      const LayerCache&, LayerGrads*) const {
  Tensor grad_in(in.shape());
  const double* x = in.data();
  const double* g = grad_out.data();
  double* gi = grad_in.data();
  for (size_t i = 0; i < in.size(); ++i) gi[i] = x[i] > 0.0 ? g[i] : 0.0;
  return grad_in;
}

Tensor Sigmoid::forward(const Tensor& in, Mode, LayerCache&, Rng*) const {
  Tensor out(in.shape());
  for (size_t i = 0; i < in.size(); ++i) out.data()[i] = sigmoid(in.data()[i]);
  return out;
}

Tensor Sigmoid::backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode,
                         const LayerCache&, LayerGrads*) const {
  Tensor grad_in(in.shape());
  for (size_t i = 0; i < in.size(); ++i) {
    const double p = out.data()[i];
    grad_in.data()[i] = grad_out.data()[i] * p * (1.0 - p);
  }
  return grad_in;
}

Dropout::Dropout(double rate) : rate(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidInput, "dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& in, Mode mode, LayerCache& cache, Rng* rng) const {
  if (mode == Mode::kInfer || rate == 0.0) {
    cache.aux.clear();
    return in;
  }
  if (rng == nullptr) throw Error(ErrorCode::kInvalidInput, "train-mode dropout needs an rng");
  const double keep_scale = 1.0 / (1.0 - rate);
  cache.aux.resize(in.size());
  Tensor out(in.shape());
  for (size_t i = 0; i < in.size(); ++i) {
    cache.aux[i] = rng->uniform() < rate ? 0.0 : keep_scale;
    out.data()[i] = in.data()[i] * cache.aux[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                         const LayerCache& cache, LayerGrads*) const {
  if (cache.aux.empty()) return grad_out;
  Tensor grad_in(in.shape());
  for (size_t i = 0; i < in.size(); ++i) grad_in.data()[i] = grad_out.data()[i] * cache.aux[i];
  return grad_in;
}

// ---------------------------------------------------------------------------
// MaxPool

Shape MaxPool::output_shape(const Shape& in) const {
  if (pool_t == 0) throw Error(ErrorCode::kShape, "pool length must be positive");
  return {in.n, (in.t + pool_t - 1) / pool_t, in.c, in.f};
}

std::vector<size_t> MaxPool::argmax(const Tensor& in) const {
  const Shape& s = in.shape();
  const Shape o = output_shape(s);
  std::vector<size_t> idx(o.size());
  const size_t row = s.c * s.f;
  for (size_t n = 0; n < s.n; ++n) {
    for (size_t ot = 0; ot < o.t; ++ot) {
      const size_t t0 = ot * pool_t;
      const size_t t1 = std::min(t0 + pool_t, s.t);
      for (size_t k = 0; k < row; ++k) {
        size_t best = (n * s.t + t0) * row + k;
        for (size_t t = t0 + 1; t < t1; ++t) {
          const size_t i = (n * s.t + t) * row + k;
          if (in.data()[i] > in.data()[best]) best = i;
        }
        idx[(n * o.t + ot) * row + k] = best;
      }
    }
  }
  return idx;
}

Tensor MaxPool::forward(const Tensor& in, Mode, LayerCache&, Rng*) const {
  Tensor out(output_shape(in.shape()));
  const auto idx = argmax(in);
  for (size_t i = 0; i < idx.size(); ++i) out.data()[i] = in.data()[idx[i]];
  return out;
}

Tensor MaxPool::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                         const LayerCache&, LayerGrads*) const {
  Tensor grad_in(in.shape());
  const auto idx = argmax(in);
  for (size_t i = 0; i < idx.size(); ++i) grad_in.data()[idx[i]] += grad_out.data()[i];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(size_t in_units, size_t out_units) {
  if (in_units == 0 || out_units == 0) throw Error(ErrorCode::kShape, "dense dimensions must be positive");
  weight = {"weight", {in_units, out_units}, std::vector<double>(in_units * out_units, 0.0)};
  bias = {"bias", {out_units}, std::vector<double>(out_units, 0.0)};
}

Shape Dense::output_shape(const Shape& in) const {
  if (in.sample_size() != in_units()) {
    throw Error(ErrorCode::kShape, "dense expects " + std::to_string(in_units()) +
                                       " inputs, got " + std::to_string(in.sample_size()));
  }
  return {in.n, 1, 1, out_units()};
}

Tensor Dense::forward(const Tensor& in, Mode, LayerCache&, Rng*) const {
  Tensor out(output_shape(in.shape()));
  const size_t I = in_units(), O = out_units();
  for (size_t n = 0; n < in.shape().n; ++n) {
    std::span<const double> x = in.sample(n);
    double* y = out.sample(n).data();
    std::copy(bias.values.begin(), bias.values.end(), y);
    for (size_t i = 0; i < I; ++i) {
      const double xi = x[i];
      const double* w = weight.values.data() + i * O;
      for (size_t o = 0; o < O; ++o) y[o] += xi * w[o];
    }
  }
  return out;
}

Tensor Dense::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                       const LayerCache&, LayerGrads* grads) const {
  Tensor grad_in(in.shape());
  const size_t I = in_units(), O = out_units();
  for (size_t n = 0; n < in.shape().n; ++n) {
    std::span<const double> x = in.sample(n);
    const double* g = grad_out.sample(n).data();
    double* gi = grad_in.sample(n).data();
    for (size_t i = 0; i < I; ++i) {
      const double* w = weight.values.data() + i * O;
      double s = 0.0;
      for (size_t o = 0; o < O; ++o) s += w[o] * g[o];
      gi[i] = s;
    }
    if (grads != nullptr) {
      double* dw = (*grads)[0].data();
      for (size_t i = 0; i < I; ++i) {
        const double xi = x[i];
        for (size_t o = 0; o < O; ++o) dw[i * O + o] += xi * g[o];
      }
      for (size_t o = 0; o < O; ++o) (*grads)[1][o] += g[o];
    }
  }
  return grad_in;
}

}  // namespace seizure::nn
