#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "seizure/aggregation.hpp"
#include "seizure/eeg_data.hpp"
#include "seizure/metrics.hpp"
#include "seizure/model.hpp"

namespace seizure::cli {

inline constexpr const char* kOutputRootEnv = "SEIZURE_OUTPUT_ROOT";
inline constexpr size_t kFinalModel = eeg::kNumFolds;  // index after the CV folds

// Relative output paths are placed under $SEIZURE_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output(const std::filesystem::path& path);
// Creates the directory and writes run_config.json into it.
void prepare_output_dir(const std::filesystem::path& dir, const nlohmann::json& run_config);

struct Dataset {
  std::vector<eeg::EegRecord> records;
  eeg::SplitPlan plan;
};

void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

std::vector<eeg::Segment> segments_for(const Dataset& data, std::span<const std::string> patients);
std::vector<const eeg::EegRecord*> records_for(const Dataset& data, std::span<const std::string> patients);

// Fold models use folds[f]; the final model fits final_fit / final_validation.
uint64_t fold_seed(uint64_t seed, size_t fold);
std::string model_name(size_t fold);
model::TrainedModel train_fold(const Dataset& data, const model::ModelConfig& config, size_t fold,
                               const model::TrainOptions& options = {});
std::string history_csv(const model::TrainedModel& model);

struct ModelSet {
  std::array<model::TrainedModel, eeg::kNumFolds> folds;
  model::TrainedModel final_model;
};
void save_models(const ModelSet& models, const std::filesystem::path& dir);
ModelSet load_models(const std::filesystem::path& dir);

std::vector<model::ProbabilitySeries> series_for(const model::TrainedModel& model, const Dataset& data,
                                                 std::span<const std::string> patients);
// Each fold model over its own held-out fold patients, concatenated in fold order.
std::vector<model::ProbabilitySeries> cv_series(const ModelSet& models, const Dataset& data);
std::vector<model::ProbabilitySeries> test_series(const ModelSet& models, const Dataset& data);

struct Evaluation {
  std::vector<metrics::MetricRow> rows;
  std::vector<double> fold_auc;
  metrics::MeanStd auc;
  double test_auc = 0.0;
  std::vector<double> cv_probs;
  std::vector<double> test_probs;
};
Evaluation evaluate(const ModelSet& models, const Dataset& data, std::span<const double> thresholds);
nlohmann::json to_json(const Evaluation& e);

}  // namespace seizure::cli
