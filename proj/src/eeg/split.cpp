#include <algorithm>
#include <cmath>
#include <set>

#include "seizure/common.hpp"
#include "seizure/eeg_data.hpp"

namespace seizure::eeg {

namespace {

constexpr double kTestFraction = 0.20;
constexpr double kValidationFraction = 0.10;

size_t fraction_count(size_t n, double fraction) {
  return std::max<size_t>(1, static_cast<size_t>(std::lround(fraction * static_cast<double>(n))));
}

// Moves the last 10% of `pool` (in shuffled order) to a validation list.
void hold_out_validation(const std::vector<std::string>& pool, std::vector<std::string>& fit,
                         std::vector<std::string>& validation) {
  const size_t n_val = fraction_count(pool.size(), kValidationFraction);
  fit.assign(pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(n_val));
  validation.assign(pool.end() - static_cast<std::ptrdiff_t>(n_val), pool.end());
}

}  // namespace

SplitPlan split_patients(std::vector<std::string> patient_ids, uint64_t seed) {
  std::sort(patient_ids.begin(), patient_ids.end());
  patient_ids.erase(std::unique(patient_ids.begin(), patient_ids.end()), patient_ids.end());
  if (patient_ids.size() < 10) {
    throw Error(ErrorCode::kInvalidInput,
                "split needs at least 10 patients, got " + std::to_string(patient_ids.size()));
  }
  Rng rng(seed);
  shuffle(patient_ids, rng);

  SplitPlan plan;
  plan.seed = seed;
  const size_t n_test = fraction_count(patient_ids.size(), kTestFraction);
  plan.test_patients.assign(patient_ids.begin(), patient_ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  plan.train_patients.assign(patient_ids.begin() + static_cast<std::ptrdiff_t>(n_test), patient_ids.end());
  hold_out_validation(plan.train_patients, plan.final_fit, plan.final_validation);

  const size_t n_train = plan.train_patients.size();
  size_t cursor = 0;
  for (size_t f = 0; f < kNumFolds; ++f) {
    const size_t size = n_train / kNumFolds + (f < n_train % kNumFolds ? 1 : 0);
    Fold& fold = plan.folds[f];
    fold.test.assign(plan.train_patients.begin() + static_cast<std::ptrdiff_t>(cursor),
                     plan.train_patients.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    std::vector<std::string> pool;
    for (size_t i = 0; i < n_train; ++i) {
      if (i < cursor || i >= cursor + size) pool.push_back(plan.train_patients[i]);
    }
    cursor += size;
    if (fold.test.empty() || pool.size() < 2) {
      throw Error(ErrorCode::kInvalidInput, "too few patients to populate fold " + std::to_string(f));
    }
    hold_out_validation(pool, fold.train, fold.validation);
  }
  return plan;
}

nlohmann::json to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  j["test_patients"] = plan.test_patients;
  j["train_patients"] = plan.train_patients;
  j["final_fit"] = plan.final_fit;
  j["final_validation"] = plan.final_validation;
  auto folds = nlohmann::json::array();
  for (const auto& f : plan.folds) {
    folds.push_back({{"test", f.test}, {"train", f.train}, {"validation", f.validation}});
  }
  j["folds"] = folds;
  return j;
}

SplitPlan split_plan_from_json(const nlohmann::json& j) {
  try {
    SplitPlan plan;
    plan.seed = j.at("seed").get<uint64_t>();
    plan.test_patients = j.at("test_patients").get<std::vector<std::string>>();
    plan.train_patients = j.at("train_patients").get<std::vector<std::string>>();
    plan.final_fit = j.at("final_fit").get<std::vector<std::string>>();
    plan.final_validation = j.at("final_validation").get<std::vector<std::string>>();
    const auto& folds = j.at("folds");
    if (folds.size() != kNumFolds) throw Error(ErrorCode::kParse, "split plan must have 5 folds");
    for (size_t f = 0; f < kNumFolds; ++f) {
      plan.folds[f].test = folds[f].at("test").get<std::vector<std::string>>();
      plan.folds[f].train = folds[f].at("train").get<std::vector<std::string>>();
      plan.folds[f].validation = folds[f].at("validation").get<std::vector<std::string>>();
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("split plan: ") + e.what());
  }
}

}  // namespace seizure::eeg
