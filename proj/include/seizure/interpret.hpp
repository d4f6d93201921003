#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seizure/eeg_data.hpp"
#include "seizure/model.hpp"

namespace seizure::interpret {

// What is rescaled after each ascent step.
enum class StepNorm {
  kGradientRms,  // x += step * g / rms(g)
  kInputRenorm,  // x += step * g, then x is rescaled to its initial RMS
};
std::string_view to_string(StepNorm n);
StepNorm step_norm_from_string(std::string_view name);

struct MaximizeOptions {
  size_t steps = 80;
  double step_size = 0.5;
  StepNorm norm = StepNorm::kGradientRms;
  size_t dead_after = 5;  // consecutive zero-gradient steps
};

struct MaximizedInput {
  size_t filter = 0;
  size_t layer = 0;
  std::vector<double> signal;  // row-major [1280][4], microvolts
  double init_amp_uv = 0.0;
  double initial_objective = 0.0;
  double objective = 0.0;  // mean post-ReLU activation of the filter on `signal`
  double pred = 0.0;       // network probability for `signal`
  std::array<std::vector<double>, eeg::kNumChannels> main_frequencies;
  bool dead_filter = false;
  size_t steps_run = 0;
};

// Mean over the (time, channel) map of `filter` at the output of `layer`.
double filter_objective(const nn::Network& net, size_t layer, size_t filter, std::span<const double> signal);

MaximizedInput maximize_input(const model::TrainedModel& model, size_t layer, size_t filter, double init_amp_uv,
                              uint64_t seed, const MaximizeOptions& options = {});

// All filters of `layer`, by final objective descending, ties by index.
std::vector<MaximizedInput> rank_filters(const model::TrainedModel& model, size_t layer, double init_amp_uv,
                                         uint64_t seed, const MaximizeOptions& options = {});

struct Spectrum {
  std::vector<double> freqs;  // Hz
  std::vector<double> power;  // density, units^2 / Hz
  double fs = eeg::kTargetFs;
  size_t segment_len = 256;
  size_t overlap = 128;
};

// Hann-windowed, mean-detrended, averaged one-sided periodograms.
Spectrum welch_psd(std::span<const double> signal, double fs = eeg::kTargetFs, size_t segment_len = 256);
// Local maxima holding at least `relative_floor` of the global maximum,
// strongest first, rounded to whole Hz.
std::vector<double> main_frequencies(const Spectrum& spectrum, double relative_floor = 0.25);

// Column `ch` of a row-major [n][4] block.
std::vector<double> channel(std::span<const double> block, size_t ch);

struct AttributionMap {
  std::vector<double> shap;  // row-major [1280][4]
  double output = 0.0;       // target at the input
  double reference = 0.0;    // target at the baseline
  double delta = 0.0;        // output - reference
  double normalization = 0.0;  // max |shap|, used for display
};

enum class Target { kProbability, kLogit };

// DeepLIFT with Linear and Rescale rules against `baseline` (zeros if empty).
// `sample_shape` is the (t, c, f) shape of one input sample.
AttributionMap deeplift(const nn::Network& net, nn::Shape sample_shape, std::span<const double> input,
                        std::span<const double> baseline = {}, Target target = Target::kProbability);
AttributionMap deeplift(const model::TrainedModel& model, std::span<const double> segment,
                        Target target = Target::kProbability);

// Positive shap / normalization, averaged over a centered 32-sample window.
std::vector<double> smoothed_positive(const AttributionMap& map, size_t ch, size_t width = 32);

std::string attribution_csv(const AttributionMap& map);
std::string attribution_svg(const AttributionMap& map, std::span<const double> segment);
// Writes the SVG to `svg_path` and the raw matrix next to it as .csv.
void render_attribution(const AttributionMap& map, std::span<const double> segment,
                        const std::filesystem::path& svg_path);

std::string maximized_svg(std::span<const MaximizedInput> inputs);
void render_maximized(std::span<const MaximizedInput> inputs, const std::filesystem::path& svg_path);

// filter_idx, one frequency list per channel, pred, loss.
std::string maximized_report_csv(std::span<const MaximizedInput> inputs);
// freq plus one power column per channel of each input.
std::string spectra_csv(std::span<const MaximizedInput> inputs);

}  // namespace seizure::interpret
