#include "pipeline.hpp"

#include <cstdlib>
#include <set>
#include <sstream>

#include "seizure/common.hpp"

namespace seizure::cli {

namespace fs = std::filesystem;

fs::path resolve_output(const fs::path& path) {
  const char* root = std::getenv(kOutputRootEnv);
  if (path.is_relative() && root != nullptr && *root != '\0') return fs::path(root) / path;
  return path;
}

void prepare_output_dir(const fs::path& dir, const nlohmann::json& run_config) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "run_config.json", run_config.dump(2) + "\n");
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  write_file_atomic(dir / "records.bin", eeg::serialize_records(data.records));
  write_file_atomic(dir / "split.json", eeg::to_json(data.plan).dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.records = eeg::deserialize_records(read_file(dir / "records.bin"));
  try {
    d.plan = eeg::split_plan_from_json(nlohmann::json::parse(read_file(dir / "split.json")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("split.json: ") + e.what());
  }
  return d;
}

std::vector<const eeg::EegRecord*> records_for(const Dataset& data, std::span<const std::string> patients) {
  const std::set<std::string> wanted(patients.begin(), patients.end());
  std::vector<const eeg::EegRecord*> out;
  for (const auto& r : data.records) {
    if (wanted.count(r.patient_id) != 0) out.push_back(&r);
  }
  return out;
}

std::vector<eeg::Segment> segments_for(const Dataset& data, std::span<const std::string> patients) {
  std::vector<eeg::Segment> out;
  for (const auto* r : records_for(data, patients)) {
    auto s = eeg::training_segments(*r);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

uint64_t fold_seed(uint64_t seed, size_t fold) { return Rng(seed).fork(fold).next_u64(); }

std::string model_name(size_t fold) {
  return fold == kFinalModel ? std::string("final") : "fold_" + std::to_string(fold);
}

model::TrainedModel train_fold(const Dataset& data, const model::ModelConfig& config, size_t fold,
                               const model::TrainOptions& options) {
  if (fold > kFinalModel) throw Error(ErrorCode::kInvalidInput, "fold index out of range");
  const auto& fit = fold == kFinalModel ? data.plan.final_fit : data.plan.folds[fold].train;
  const auto& val = fold == kFinalModel ? data.plan.final_validation : data.plan.folds[fold].validation;
  model::ModelConfig cfg = config;
  cfg.seed = fold_seed(config.seed, fold);
  const auto train_set = segments_for(data, fit);
  const auto val_set = segments_for(data, val);
  return model::train(model::build(cfg), train_set, val_set, options);
}

std::string history_csv(const model::TrainedModel& m) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,best\n";
  for (const auto& e : m.history) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
        << int(e.epoch == m.best_epoch) << '\n';
  }
  return out.str();
}

void save_models(const ModelSet& models, const fs::path& dir) {
  for (size_t f = 0; f <= kFinalModel; ++f) {
    const auto& m = f == kFinalModel ? models.final_model : models.folds[f];
    model::save(m, dir / (model_name(f) + ".weights"));
    write_file_atomic(dir / ("history_" + model_name(f) + ".csv"), history_csv(m));
  }
}

ModelSet load_models(const fs::path& dir) {
  ModelSet set;
  for (size_t f = 0; f < eeg::kNumFolds; ++f) set.folds[f] = model::load(dir / (model_name(f) + ".weights"));
  set.final_model = model::load(dir / "final.weights");
  return set;
}

std::vector<model::ProbabilitySeries> series_for(const model::TrainedModel& m, const Dataset& data,
                                                 std::span<const std::string> patients) {
  std::vector<model::ProbabilitySeries> out;
  for (const auto* r : records_for(data, patients)) out.push_back(model::predict_series(m, *r));
  return out;
}

std::vector<model::ProbabilitySeries> cv_series(const ModelSet& models, const Dataset& data) {
  std::vector<model::ProbabilitySeries> out;
  for (size_t f = 0; f < eeg::kNumFolds; ++f) {
    auto s = series_for(models.folds[f], data, data.plan.folds[f].test);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

std::vector<model::ProbabilitySeries> test_series(const ModelSet& models, const Dataset& data) {
  return series_for(models.final_model, data, data.plan.test_patients);
}

namespace {

std::vector<int> labels_of(std::span<const eeg::Segment> segments) {
  std::vector<int> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.label == eeg::Label::kIctal ? 1 : 0);
  return out;
}

}  // namespace

Evaluation evaluate(const ModelSet& models, const Dataset& data, std::span<const double> thresholds) {
  Evaluation e;
  const size_t k = models.final_model.config.k;
  std::vector<int> cv_labels;
  std::array<std::vector<int>, eeg::kNumFolds> fold_labels;
  std::array<std::vector<double>, eeg::kNumFolds> fold_probs;
  for (size_t f = 0; f < eeg::kNumFolds; ++f) {
    const auto segs = segments_for(data, data.plan.folds[f].test);
    fold_labels[f] = labels_of(segs);
    fold_probs[f] = model::predict_batch(models.folds[f], segs);
    e.fold_auc.push_back(metrics::roc_auc(fold_labels[f], fold_probs[f]));
    cv_labels.insert(cv_labels.end(), fold_labels[f].begin(), fold_labels[f].end());
    e.cv_probs.insert(e.cv_probs.end(), fold_probs[f].begin(), fold_probs[f].end());
  }
  e.auc = metrics::mean_std(e.fold_auc);
  const auto test_segs = segments_for(data, data.plan.test_patients);
  const auto test_labels = labels_of(test_segs);
  e.test_probs = model::predict_batch(models.final_model, test_segs);
  e.test_auc = metrics::roc_auc(test_labels, e.test_probs);

  auto row = [&](double th, std::string fold, std::span<const int> y, std::span<const double> p) {
    metrics::MetricRow r;
    r.k = k;
    r.threshold = th;
    r.fold = std::move(fold);
    r.counts = metrics::confusion(y, p, th);
    r.metrics = metrics::metric_set(r.counts, th);
    e.rows.push_back(r);
  };
  for (double th : thresholds) {
    for (size_t f = 0; f < eeg::kNumFolds; ++f) row(th, std::to_string(f), fold_labels[f], fold_probs[f]);
    row(th, "concat", cv_labels, e.cv_probs);
    row(th, "test", test_labels, e.test_probs);
  }
  return e;
}

nlohmann::json to_json(const Evaluation& e) {
  nlohmann::json j;
  auto rows = nlohmann::json::array();
  for (const auto& r : e.rows) {
    rows.push_back({{"k", r.k},
                    {"threshold", r.threshold},
                    {"fold", r.fold},
                    {"counts", metrics::to_json(r.counts)},
                    {"metrics", metrics::to_json(r.metrics)}});
  }
  j["rows"] = rows;
  j["auc"] = {{"folds", e.fold_auc}, {"mean", e.auc.mean}, {"std", e.auc.std}};
  j["test_auc"] = e.test_auc;
  return j;
}

}  // namespace seizure::cli
