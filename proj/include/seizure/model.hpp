#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "seizure/eeg_data.hpp"
#include "seizure/nn/network.hpp"

namespace seizure::model {

struct ModelConfig {
  std::string profile = "paper";
  size_t k = 131;                               // first-block time kernel length
  std::array<size_t, 3> filters = {32, 64, 64};
  size_t second_kernel_t = 31;
  size_t third_kernel_t = 3;
  size_t kernel_c = 3;
  std::array<size_t, 3> pools = {4, 4, 4};
  size_t fc_hidden = 64;
  double dropout = 0.30;
  double l2 = 0.05;
  double lr = 0.005;
  size_t batch_size = 32;
  size_t max_epochs = 120;
  size_t patience = 15;
  uint64_t seed = 0;

  std::array<size_t, 3> time_kernels() const { return {k, second_kernel_t, third_kernel_t}; }
};

// Full-size architecture with first kernel 3 x k.
ModelConfig paper_config(size_t k, uint64_t seed);
// Reduced widths for CI-scale runs (k = 31, 4/4/8 filters, 15 epochs).
ModelConfig desk_config(uint64_t seed);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

struct ReceptiveField {
  size_t k = 0;
  // Lowest frequency whose full period fits in the first kernel: fs / k.
  double lowest_resolvable_hz = 0.0;
  std::vector<std::string> warnings;
};

ReceptiveField receptive_field(const ModelConfig& config, double fs = eeg::kTargetFs);

struct EpochRecord {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainedModel {
  ModelConfig config;
  nn::Network net;
  std::vector<EpochRecord> history;
  size_t best_epoch = 0;     // 0 until trained
  size_t stopped_epoch = 0;  // last epoch run
  ReceptiveField receptive_field;
};

// Layer indices of interest for interpretation.
size_t first_relu_index(const TrainedModel& model);
size_t last_conv_relu_index(const TrainedModel& model);

TrainedModel build(const ModelConfig& config);

// Patience bookkeeping on validation loss; improvement must be strict.
class EarlyStopping {
 public:
  explicit EarlyStopping(size_t patience) : patience_(patience) {}
  // Returns true when `val_loss` is a new best.
  bool observe(size_t epoch, double val_loss);
  bool should_stop() const { return waited_ >= patience_; }
  size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  size_t patience_;
  size_t waited_ = 0;
  size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const std::string&)> on_warning;
};

// Mini-batch SGD with early stopping; returns the best-validation weights.
TrainedModel train(TrainedModel model, std::span<const eeg::Segment> train_set,
                   std::span<const eeg::Segment> val_set, const TrainOptions& options = {});

// Mean BCE + penalty over a labeled set in infer mode.
double evaluate_loss(const TrainedModel& model, std::span<const eeg::Segment> segments);

double predict(const TrainedModel& model, std::span<const double> segment_data);
inline double predict(const TrainedModel& model, const eeg::Segment& segment) {
  return predict(model, segment.data);
}
std::vector<double> predict_batch(const TrainedModel& model, std::span<const eeg::Segment> segments);

struct ProbabilitySeries {
  std::string record_id;
  double stride_seconds = 2.5;
  std::vector<double> p;
  std::vector<eeg::Part> parts;
  std::vector<size_t> starts;

  size_t size() const { return p.size(); }
};

// Windows over every available part in time order, one probability each.
ProbabilitySeries predict_series(const TrainedModel& model, const eeg::EegRecord& record);

inline constexpr uint32_t kWeightFormatVersion = 1;

std::string serialize(const TrainedModel& model);
TrainedModel deserialize(std::string_view bytes);
void save(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load(const std::filesystem::path& path);

// Stacks segments into an [n][1280][4][1] tensor.
nn::Tensor to_tensor(std::span<const eeg::Segment> segments);

}  // namespace seizure::model
