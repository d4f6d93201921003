#include "seizure/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace seizure::model {

using eeg::Segment;
using nn::Mode;
using nn::Shape;
using nn::Tensor;

ModelConfig paper_config(size_t k, uint64_t seed) {
  ModelConfig c;
  c.profile = "paper";
  c.k = k;
  c.seed = seed;
  return c;
}

ModelConfig desk_config(uint64_t seed) {
  ModelConfig c;
  c.profile = "desk";
  c.k = 31;
  c.filters = {4, 4, 8};
  c.fc_hidden = 16;
  c.max_epochs = 15;
  c.patience = 4;
  c.seed = seed;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"profile", c.profile},       {"k", c.k},
          {"filters", c.filters},       {"second_kernel_t", c.second_kernel_t},
          {"third_kernel_t", c.third_kernel_t}, {"kernel_c", c.kernel_c},
          {"pools", c.pools},           {"fc_hidden", c.fc_hidden},
          {"dropout", c.dropout},       {"l2", c.l2},
          {"lr", c.lr},                 {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.profile = j.at("profile").get<std::string>();
    c.k = j.at("k").get<size_t>();
    c.filters = j.at("filters").get<std::array<size_t, 3>>();
    c.second_kernel_t = j.at("second_kernel_t").get<size_t>();
    c.third_kernel_t = j.at("third_kernel_t").get<size_t>();
    c.kernel_c = j.at("kernel_c").get<size_t>();
    c.pools = j.at("pools").get<std::array<size_t, 3>>();
    c.fc_hidden = j.at("fc_hidden").get<size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.l2 = j.at("l2").get<double>();
    c.lr = j.at("lr").get<double>();
    c.batch_size = j.at("batch_size").get<size_t>();
    c.max_epochs = j.at("max_epochs").get<size_t>();
    c.patience = j.at("patience").get<size_t>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model config: ") + e.what());
  }
}

ReceptiveField receptive_field(const ModelConfig& config, double fs) {
  ReceptiveField rf;
  rf.k = config.k;
  rf.lowest_resolvable_hz = config.k == 0 ? 0.0 : fs / static_cast<double>(config.k);
  if (config.k % 2 == 0) {
    rf.warnings.push_back("first kernel length " + std::to_string(config.k) +
                          " is even; same padding is asymmetric");
  }
  return rf;
}

namespace {

void validate(const ModelConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidInput, "model config: " + msg); };
  if (c.k == 0 || c.second_kernel_t == 0 || c.third_kernel_t == 0 || c.kernel_c == 0) fail("kernel lengths must be positive");
  for (size_t f : c.filters) if (f == 0) fail("filter counts must be positive");
  for (size_t p : c.pools) if (p == 0) fail("pool lengths must be positive");
  if (c.fc_hidden == 0) fail("fc width must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (c.l2 < 0.0 || c.lr <= 0.0) fail("l2 must be >= 0 and lr > 0");
  if (c.batch_size < 2) fail("batch size must be at least 2");
  if (c.max_epochs == 0) fail("max_epochs must be positive");
  if (c.kernel_c > eeg::kNumChannels + 2) fail("channel kernel wider than padded channel axis");
}

void he_uniform(nn::ParamBlock& block, size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : block.values) v = rng.uniform(-limit, limit);
}

}  // namespace

TrainedModel build(const ModelConfig& config) {
  validate(config);
  TrainedModel m;
  m.config = config;
  m.receptive_field = receptive_field(config);
  Rng rng = Rng(config.seed).fork(1);

  const auto kts = config.time_kernels();
  size_t in_f = 1;
  size_t t = eeg::kWindowLen;
  for (size_t b = 0; b < 3; ++b) {
    for (size_t unit = 0; unit < 2; ++unit) {
      nn::Conv2d conv(kts[b], config.kernel_c, in_f, config.filters[b]);
      he_uniform(conv.kernel, kts[b] * config.kernel_c * in_f, rng);
      m.net.add(std::move(conv));
      m.net.add(nn::BatchNorm(config.filters[b]));
      m.net.add(nn::Relu{});
      in_f = config.filters[b];
    }
    m.net.add(nn::MaxPool(config.pools[b]));
    t = (t + config.pools[b] - 1) / config.pools[b];
  }
  const size_t flat = t * eeg::kNumChannels * in_f;
  m.net.add(nn::Dropout(config.dropout));
  nn::Dense hidden(flat, config.fc_hidden);
  he_uniform(hidden.weight, flat, rng);
  m.net.add(std::move(hidden));
  m.net.add(nn::Relu{});
  m.net.add(nn::Dropout(config.dropout));
  nn::Dense out(config.fc_hidden, 1);
  he_uniform(out.weight, config.fc_hidden, rng);
  m.net.add(std::move(out));
  m.net.add(nn::Sigmoid{});
  return m;
}

size_t first_relu_index(const TrainedModel& model) {
  for (size_t i = 0; i < model.net.size(); ++i) {
    if (nn::kind_of(model.net.layer(i)) == nn::LayerKind::kRelu) return i;
  }
  throw Error(ErrorCode::kInvalidInput, "network has no ReLU layer");
}

size_t last_conv_relu_index(const TrainedModel& model) {
  // The ReLU immediately preceding the final max pool.
  size_t last_pool = model.net.size();
  for (size_t i = 0; i < model.net.size(); ++i) {
    if (nn::kind_of(model.net.layer(i)) == nn::LayerKind::kMaxPool) last_pool = i;
  }
  if (last_pool == model.net.size() || last_pool == 0 ||
      nn::kind_of(model.net.layer(last_pool - 1)) != nn::LayerKind::kRelu) {
    throw Error(ErrorCode::kInvalidInput, "network has no conv-block ReLU before a pool");
  }
  return last_pool - 1;
}

Tensor to_tensor(std::span<const Segment> segments) {
  Tensor x(Shape{segments.size(), eeg::kWindowLen, eeg::kNumChannels, 1});
  for (size_t n = 0; n < segments.size(); ++n) {
    if (segments[n].data.size() != eeg::kWindowLen * eeg::kNumChannels) {
      throw Error(ErrorCode::kShape, "segment must be 1280 x 4");
    }
    std::copy(segments[n].data.begin(), segments[n].data.end(), x.sample(n).begin());
  }
  return x;
}

bool EarlyStopping::observe(size_t epoch, double val_loss) {
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    waited_ = 0;
    return true;
  }
  ++waited_;
  return false;
}

namespace {

constexpr size_t kInferChunk = 64;

double label_value(const Segment& s) {
  if (s.label == eeg::Label::kUnlabeled) throw Error(ErrorCode::kInvalidInput, "training segment is unlabeled");
  return s.label == eeg::Label::kIctal ? 1.0 : 0.0;
}

}  // namespace

std::vector<double> predict_batch(const TrainedModel& model, std::span<const Segment> segments) {
  tune_allocator();
  std::vector<double> out;
  out.reserve(segments.size());
  for (size_t begin = 0; begin < segments.size(); begin += kInferChunk) {
    const size_t end = std::min(begin + kInferChunk, segments.size());
    const Tensor probs = model.net.forward(to_tensor(segments.subspan(begin, end - begin)), Mode::kInfer);
    out.insert(out.end(), probs.values().begin(), probs.values().end());
  }
  return out;
}

double predict(const TrainedModel& model, std::span<const double> segment_data) {
  if (segment_data.size() != eeg::kWindowLen * eeg::kNumChannels) {
    throw Error(ErrorCode::kShape, "segment must be 1280 x 4");
  }
  Tensor x(Shape{1, eeg::kWindowLen, eeg::kNumChannels, 1},
           std::vector<double>(segment_data.begin(), segment_data.end()));
  return model.net.forward(x, Mode::kInfer).values()[0];
}

double evaluate_loss(const TrainedModel& model, std::span<const Segment> segments) {
  const auto probs = predict_batch(model, segments);
  std::vector<double> labels;
  labels.reserve(segments.size());
  for (const auto& s : segments) labels.push_back(label_value(s));
  return nn::bce_loss_with_l2(probs, labels, model.net, model.config.l2).total;
}

TrainedModel train(TrainedModel model, std::span<const Segment> train_set,
                   std::span<const Segment> val_set, const TrainOptions& options) {
  if (train_set.empty() || val_set.empty()) {
    throw Error(ErrorCode::kInvalidInput, "training and validation sets must be non-empty");
  }
  tune_allocator();
  const ModelConfig& cfg = model.config;
  Rng root(cfg.seed);
  Rng shuffle_rng = root.fork(2);
  Rng dropout_rng = root.fork(3);

  std::vector<double> labels(train_set.size());
  for (size_t i = 0; i < train_set.size(); ++i) labels[i] = label_value(train_set[i]);
  const double positives = std::accumulate(labels.begin(), labels.end(), 0.0);
  const double share = positives / static_cast<double>(labels.size());
  if (options.on_warning && (share < 0.4 || share > 0.6)) {
    options.on_warning("training classes are imbalanced (" + std::to_string(share * 100.0) + "% ictal)");
  }

  EarlyStopping stopper(cfg.patience);
  nn::Network best_net = model.net;
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});
  model.history.clear();

  for (size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    // Batch boundaries; a trailing single sample joins the previous batch.
    std::vector<size_t> bounds;
    for (size_t b = 0; b < order.size(); b += cfg.batch_size) bounds.push_back(b);
    if (bounds.size() > 1 && order.size() - bounds.back() < 2) bounds.pop_back();
    bounds.push_back(order.size());

    double loss_sum = 0.0;
    for (size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
      const size_t b0 = bounds[bi], b1 = bounds[bi + 1];
      std::vector<Segment> batch;
      std::vector<double> batch_labels;
      batch.reserve(b1 - b0);
      for (size_t i = b0; i < b1; ++i) {
        batch.push_back(train_set[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      nn::Tape tape;
      const Tensor probs = model.net.forward(to_tensor(batch), Mode::kTrain, &dropout_rng, &tape);
      const auto loss = nn::bce_loss_with_l2(probs.values(), batch_labels, model.net, cfg.l2);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << bi;
        throw Error(ErrorCode::kDivergence, msg.str());
      }
      loss_sum += loss.total * static_cast<double>(b1 - b0);
      Tensor grad_out(probs.shape(), loss.grad_probs);
      nn::NetworkGrads grads = model.net.zero_grads();
      model.net.backward(tape, grad_out, Mode::kTrain, &grads);
      nn::add_l2_gradient(model.net, cfg.l2, grads);
      try {
        nn::sgd_step(model.net, grads, cfg.lr);
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << "epoch " << epoch << ", batch " << bi << ": " << e.what();
        throw Error(ErrorCode::kDivergence, msg.str());
      }
      model.net.commit_statistics(tape);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = evaluate_loss(model, val_set);
    if (!std::isfinite(rec.val_loss)) {
      throw Error(ErrorCode::kDivergence, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    model.history.push_back(rec);
    model.stopped_epoch = epoch;
    if (options.on_epoch) options.on_epoch(rec);
    if (stopper.observe(epoch, rec.val_loss)) best_net = model.net;
    if (stopper.should_stop()) break;
  }
  model.net = std::move(best_net);
  model.best_epoch = stopper.best_epoch();
  return model;
}

ProbabilitySeries predict_series(const TrainedModel& model, const eeg::EegRecord& record) {
  const auto parts = eeg::partition(record);
  if (!parts.available(eeg::Part::kInterictal) || !parts.available(eeg::Part::kIctal)) {
    throw Error(ErrorCode::kInvalidInput, "record " + record.record_id + " lacks interictal or ictal part");
  }
  ProbabilitySeries series;
  series.record_id = record.record_id;
  std::vector<Segment> all;
  for (eeg::Part part : eeg::kAllParts) {
    if (!parts.available(part)) continue;
    auto segs = eeg::windows(record, part, *parts[part], false);
    for (auto& s : segs) {
      series.parts.push_back(part);
      series.starts.push_back(s.start);
      all.push_back(std::move(s));
    }
  }
  series.p = predict_batch(model, all);
  return series;
}

}  // namespace seizure::model
