#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "pipeline.hpp"
#include "seizure/common.hpp"
#include "seizure/interpret.hpp"

namespace fs = std::filesystem;
using namespace seizure;

namespace {

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    try {
      size_t used = 0;
      const double v = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidInput, "bad threshold '" + part + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidInput, "no thresholds given");
  return out;
}

nlohmann::json run_config(const std::string& command, nlohmann::json options) {
  return {{"command", command}, {"options", std::move(options)}};
}

void log(const std::string& line) { std::cerr << line << std::endl; }

struct PrepareArgs {
  bool synth = false;
  std::string manifest;
  std::string data_dir;
  size_t patients = 40;
  std::optional<uint64_t> seed;
  std::optional<uint64_t> split_seed;
  std::string out;
};

void cmd_prepare(const PrepareArgs& a) {
  if (a.synth == !a.manifest.empty()) {
    throw Error(ErrorCode::kInvalidInput, "prepare needs exactly one of --synth or --manifest");
  }
  if (!a.split_seed) throw Error(ErrorCode::kInvalidInput, "--split-seed is required");
  cli::Dataset data;
  nlohmann::json opts;
  if (a.synth) {
    if (!a.seed) throw Error(ErrorCode::kInvalidInput, "--seed is required with --synth");
    eeg::SynthParams p;
    p.n_patients = a.patients;
    p.seed = *a.seed;
    data.records = eeg::synth_generate(p);
    opts["synth"] = eeg::to_json(p);
  } else {
    const auto entries = eeg::parse_manifest(read_file(a.manifest));
    const fs::path base = a.data_dir.empty() ? fs::path(a.manifest).parent_path() : fs::path(a.data_dir);
    for (const auto& e : entries) {
      data.records.push_back(eeg::resample_to_256(eeg::load_record(e, base / e.file)));
    }
    opts["manifest"] = a.manifest;
    opts["data_dir"] = base.string();
  }
  std::vector<std::string> ids;
  for (const auto& r : data.records) ids.push_back(r.patient_id);
  data.plan = eeg::split_patients(ids, *a.split_seed);
  opts["split_seed"] = *a.split_seed;
  opts["records"] = data.records.size();

  const fs::path out = cli::resolve_output(a.out);
  opts["out"] = out.string();
  cli::prepare_output_dir(out, run_config("prepare", opts));
  cli::save_dataset(data, out);
  log("prepared " + std::to_string(data.records.size()) + " records in " + out.string());
}

struct TrainArgs {
  std::string data;
  std::string profile = "desk";
  std::optional<size_t> k;
  std::optional<uint64_t> seed;
  std::optional<size_t> max_epochs;
  std::optional<size_t> patience;
  std::string out;
};

model::ModelConfig resolve_config(const TrainArgs& a) {
  if (!a.seed) throw Error(ErrorCode::kInvalidInput, "--seed is required");
  model::ModelConfig cfg;
  if (a.profile == "desk") {
    cfg = model::desk_config(*a.seed);
    if (a.k) cfg.k = *a.k;
  } else if (a.profile == "paper") {
    cfg = model::paper_config(a.k.value_or(131), *a.seed);
  } else {
    throw Error(ErrorCode::kInvalidInput, "unknown profile '" + a.profile + "' (expected desk or paper)");
  }
  if (a.max_epochs) cfg.max_epochs = *a.max_epochs;
  if (a.patience) cfg.patience = *a.patience;
  return cfg;
}

void cmd_train(const TrainArgs& a) {
  const model::ModelConfig cfg = resolve_config(a);
  const auto data = cli::load_dataset(a.data);
  const fs::path out = cli::resolve_output(a.out);
  nlohmann::json opts = {{"data", a.data}, {"out", out.string()}, {"model", model::to_json(cfg)}};
  auto seeds = nlohmann::json::object();
  for (size_t f = 0; f <= cli::kFinalModel; ++f) seeds[cli::model_name(f)] = cli::fold_seed(cfg.seed, f);
  opts["model_seeds"] = seeds;
  const auto rf = model::receptive_field(cfg);
  opts["lowest_resolvable_hz"] = rf.lowest_resolvable_hz;
  for (const auto& w : rf.warnings) log("warning: " + w);
  cli::prepare_output_dir(out, run_config("train", opts));

  cli::ModelSet set;
  for (size_t f = 0; f <= cli::kFinalModel; ++f) {
    model::TrainOptions o;
    const std::string name = cli::model_name(f);
    o.on_epoch = [&](const model::EpochRecord& e) {
      log(name + " epoch " + std::to_string(e.epoch) + " train " + format_double(e.train_loss, 6) + " val " +
          format_double(e.val_loss, 6));
    };
    o.on_warning = [&](const std::string& w) { log(name + " warning: " + w); };
    auto m = cli::train_fold(data, cfg, f, o);
    (f == cli::kFinalModel ? set.final_model : set.folds[f]) = std::move(m);
  }
  cli::save_models(set, out);
}

struct EvaluateArgs {
  std::string data;
  std::string models;
  std::string thresholds = "0.15,0.85";
  size_t bins = 50;
  std::string out;
};

void cmd_evaluate(const EvaluateArgs& a) {
  const auto thresholds = parse_thresholds(a.thresholds);
  const auto data = cli::load_dataset(a.data);
  const auto models = cli::load_models(a.models);
  const fs::path out = cli::resolve_output(a.out);
  cli::prepare_output_dir(out, run_config("evaluate", {{"data", a.data},
                                                       {"models", a.models},
                                                       {"thresholds", thresholds},
                                                       {"bins", a.bins},
                                                       {"out", out.string()}}));
  const auto e = cli::evaluate(models, data, thresholds);
  write_file_atomic(out / "metrics.json", cli::to_json(e).dump(2) + "\n");
  write_file_atomic(out / "metrics.csv", metrics::metric_rows_csv(e.rows));
  write_file_atomic(out / "histogram_cv.csv", metrics::histogram_csv(metrics::prob_histogram(e.cv_probs, a.bins)));
  write_file_atomic(out / "histogram_test.csv",
                    metrics::histogram_csv(metrics::prob_histogram(e.test_probs, a.bins)));
  log("cv auc " + format_double(e.auc.mean, 4) + " +/- " + format_double(e.auc.std, 4) + ", test auc " +
      format_double(e.test_auc, 4));
}

struct OptimizeArgs {
  std::string data;
  std::string models;
  std::string method = "bayes";
  std::string out;
};

void cmd_optimize(const OptimizeArgs& a) {
  const auto method = aggregation::method_from_string(a.method);
  const auto grid = aggregation::default_grid(method);
  const auto data = cli::load_dataset(a.data);
  const auto models = cli::load_models(a.models);
  const fs::path out = cli::resolve_output(a.out);
  cli::prepare_output_dir(out, run_config("optimize", {{"data", a.data},
                                                       {"models", a.models},
                                                       {"method", a.method},
                                                       {"grid_windows", grid.windows},
                                                       {"grid_thresholds", grid.thresholds},
                                                       {"out", out.string()}}));
  const auto series = cli::cv_series(models, data);
  const auto result = aggregation::grid_search(method, series, grid);
  write_file_atomic(out / "grid.csv", aggregation::grid_csv(result));
  write_file_atomic(out / "params.json", aggregation::to_json(result).dump(2) + "\n");
  log(std::string(aggregation::to_string(method)) + " optimum window " + std::to_string(result.best_window()) +
      " threshold " + format_double(result.best_threshold()) + " f1 " + format_double(result.best_f1, 4));
}

struct AggregateArgs {
  std::string data;
  std::string models;
  std::string method = "bayes";
  std::string params;
  std::optional<size_t> window;
  std::optional<double> threshold;
  std::string on = "test";
  std::string out;
};

void cmd_aggregate(const AggregateArgs& a) {
  auto method = aggregation::method_from_string(a.method);
  size_t window = 0;
  double threshold = 0.0;
  if (!a.params.empty()) {
    const auto p = nlohmann::json::parse(read_file(a.params));
    method = aggregation::method_from_string(p.at("method").get<std::string>());
    window = p.at("window").get<size_t>();
    threshold = p.at("threshold").get<double>();
  }
  if (a.window) window = *a.window;
  if (a.threshold) threshold = *a.threshold;
  if (window == 0) throw Error(ErrorCode::kInvalidInput, "give --params or --window/--threshold");
  if (a.on != "test" && a.on != "cv") throw Error(ErrorCode::kInvalidInput, "--on must be test or cv");

  const auto data = cli::load_dataset(a.data);
  const auto models = cli::load_models(a.models);
  const fs::path out = cli::resolve_output(a.out);
  cli::prepare_output_dir(out, run_config("aggregate", {{"data", a.data},
                                                        {"models", a.models},
                                                        {"method", std::string(aggregation::to_string(method))},
                                                        {"window", window},
                                                        {"threshold", threshold},
                                                        {"on", a.on},
                                                        {"out", out.string()}}));
  const auto series = a.on == "test" ? cli::test_series(models, data) : cli::cv_series(models, data);
  std::vector<aggregation::SeizureOutcome> outcomes;
  std::ostringstream table;
  table << "record,scored,detected_in_ictal,false_positive_in_interictal,first_ictal_window\n";
  fs::create_directories(out / "timelines");
  for (const auto& s : series) {
    const auto d = aggregation::decide(method, s.p, window, threshold);
    outcomes.push_back(aggregation::seizure_eval(d, s.parts, s.record_id));
    const auto& o = outcomes.back();
    const auto& first = o.first_detection[static_cast<size_t>(eeg::Part::kIctal)];
    table << s.record_id << ',' << int(o.scored) << ',' << int(o.detected_in_ictal) << ','
          << int(o.false_positive_in_interictal) << ',' << (first ? std::to_string(*first) : "") << '\n';
    write_file_atomic(out / "timelines" / (s.record_id + ".csv"), aggregation::timeline_csv(s, d));
  }
  const auto score = aggregation::seizure_metrics(outcomes);
  for (const auto& line : score.log) log(line);
  nlohmann::json j = {{"method", std::string(aggregation::to_string(method))},
                      {"window", window},
                      {"threshold", threshold},
                      {"on", a.on},
                      {"counts", metrics::to_json(score.counts)},
                      {"metrics", metrics::to_json(score.metrics)},
                      {"skipped", score.log}};
  write_file_atomic(out / "seizure_metrics.json", j.dump(2) + "\n");
  write_file_atomic(out / "outcomes.csv", table.str());
  log("seizure-level f1 " + metrics::format_metric(score.metrics.f1) + " sensitivity " +
      metrics::format_metric(score.metrics.sensitivity));
}

struct MaximizeArgs {
  std::string model;
  std::string layer = "first";
  double init_amp = 10.0;
  std::optional<uint64_t> seed;
  size_t steps = 80;
  double step_size = 0.5;
  std::string norm = "gradient_rms";
  std::string out;
};

void cmd_maximize(const MaximizeArgs& a) {
  if (!a.seed) throw Error(ErrorCode::kInvalidInput, "--seed is required");
  const auto m = model::load(a.model);
  size_t layer = 0;
  if (a.layer == "first") {
    layer = model::first_relu_index(m);
  } else if (a.layer == "last") {
    layer = model::last_conv_relu_index(m);
  } else {
    throw Error(ErrorCode::kInvalidInput, "--layer must be first or last");
  }
  interpret::MaximizeOptions opt;
  opt.steps = a.steps;
  opt.step_size = a.step_size;
  opt.norm = interpret::step_norm_from_string(a.norm);
  const fs::path out = cli::resolve_output(a.out);
  cli::prepare_output_dir(out, run_config("maximize", {{"model", a.model},
                                                       {"layer", a.layer},
                                                       {"layer_index", layer},
                                                       {"init_amp_uv", a.init_amp},
                                                       {"seed", *a.seed},
                                                       {"steps", opt.steps},
                                                       {"step_size", opt.step_size},
                                                       {"norm", a.norm},
                                                       {"out", out.string()}}));
  const auto ranked = interpret::rank_filters(m, layer, a.init_amp, *a.seed, opt);
  write_file_atomic(out / "maximized_report.csv", interpret::maximized_report_csv(ranked));
  write_file_atomic(out / "spectra.csv", interpret::spectra_csv(ranked));
  interpret::render_maximized(ranked, out / "maximized.svg");
}

struct AttributeArgs {
  std::string model;
  std::string data;
  std::string record;
  size_t window = 0;
  bool logit = false;
  std::string out;
};

void cmd_attribute(const AttributeArgs& a) {
  const auto m = model::load(a.model);
  const auto data = cli::load_dataset(a.data);
  const eeg::EegRecord* rec = nullptr;
  for (const auto& r : data.records) {
    if (r.record_id == a.record) rec = &r;
  }
  if (rec == nullptr) throw Error(ErrorCode::kInvalidInput, "unknown record '" + a.record + "'");
  const auto parts = eeg::partition(*rec);
  std::vector<eeg::Segment> segs;
  for (auto p : eeg::kAllParts) {
    if (!parts.available(p)) continue;
    auto w = eeg::windows(*rec, p, *parts[p], false);
    segs.insert(segs.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  if (a.window >= segs.size()) {
    throw Error(ErrorCode::kInvalidInput, "window " + std::to_string(a.window) + " out of range (record has " +
                                              std::to_string(segs.size()) + ")");
  }
  const auto& seg = segs[a.window];
  const fs::path out = cli::resolve_output(a.out);
  cli::prepare_output_dir(out, run_config("attribute", {{"model", a.model},
                                                        {"data", a.data},
                                                        {"record", a.record},
                                                        {"window", a.window},
                                                        {"target", a.logit ? "logit" : "probability"},
                                                        {"baseline", "zero"},
                                                        {"out", out.string()}}));
  const auto map = interpret::deeplift(m, seg.data, a.logit ? interpret::Target::kLogit
                                                            : interpret::Target::kProbability);
  interpret::render_attribution(map, seg.data, out / "attribution.svg");
  double total = 0.0;
  for (double v : map.shap) total += v;
  nlohmann::json j = {{"record", a.record},
                      {"window", a.window},
                      {"part", std::string(eeg::to_string(seg.part))},
                      {"start_sample", seg.start},
                      {"output", map.output},
                      {"reference", map.reference},
                      {"delta", map.delta},
                      {"shap_sum", total},
                      {"normalization", map.normalization}};
  write_file_atomic(out / "attribution.json", j.dump(2) + "\n");
}

int fail(std::string_view code, const std::string& message, int status) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable CNN seizure detection pipeline"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* sp = app.add_subcommand("prepare", "Build a record store and patient split");
  sp->add_flag("--synth", prep.synth, "Generate the synthetic corpus");
  sp->add_option("--manifest", prep.manifest, "JSON manifest of CSV recordings");
  sp->add_option("--data-dir", prep.data_dir, "Directory holding the manifest's CSV files");
  sp->add_option("--patients", prep.patients, "Synthetic patient count")->capture_default_str();
  sp->add_option("--seed", prep.seed, "Synthetic corpus seed");
  sp->add_option("--split-seed", prep.split_seed, "Patient split seed")->required();
  sp->add_option("--out", prep.out, "Output directory")->required();

  TrainArgs tr;
  auto* st = app.add_subcommand("train", "Train the five fold models and the final model");
  st->add_option("--data", tr.data, "Prepared data directory")->required();
  st->add_option("--profile", tr.profile, "desk or paper")->capture_default_str();
  st->add_option("--k", tr.k, "First-block kernel length");
  st->add_option("--seed", tr.seed, "Model seed")->required();
  st->add_option("--max-epochs", tr.max_epochs);
  st->add_option("--patience", tr.patience);
  st->add_option("--out", tr.out, "Output directory")->required();

  EvaluateArgs ev;
  auto* se = app.add_subcommand("evaluate", "Segment-level metrics");
  se->add_option("--data", ev.data)->required();
  se->add_option("--models", ev.models)->required();
  se->add_option("--thresholds", ev.thresholds, "Comma-separated decision thresholds")->capture_default_str();
  se->add_option("--bins", ev.bins, "Histogram bins")->capture_default_str();
  se->add_option("--out", ev.out)->required();

  OptimizeArgs op;
  auto* so = app.add_subcommand("optimize", "Grid-search seizure-level aggregation on CV outputs");
  so->add_option("--data", op.data)->required();
  so->add_option("--models", op.models)->required();
  so->add_option("--method", op.method, "bayes or diff")->capture_default_str();
  so->add_option("--out", op.out)->required();

  AggregateArgs ag;
  auto* sa = app.add_subcommand("aggregate", "Seizure-level decisions and metrics");
  sa->add_option("--data", ag.data)->required();
  sa->add_option("--models", ag.models)->required();
  sa->add_option("--method", ag.method, "bayes or diff")->capture_default_str();
  sa->add_option("--params", ag.params, "params.json written by optimize");
  sa->add_option("--window", ag.window, "W or M");
  sa->add_option("--threshold", ag.threshold, "th or th_d");
  sa->add_option("--on", ag.on, "test or cv")->capture_default_str();
  sa->add_option("--out", ag.out)->required();

  MaximizeArgs mx;
  auto* sm = app.add_subcommand("maximize", "Activation maximization of conv filters");
  sm->add_option("--model", mx.model, "Weight file")->required();
  sm->add_option("--layer", mx.layer, "first or last")->capture_default_str();
  sm->add_option("--init-amp", mx.init_amp, "Initial amplitude in microvolts")->capture_default_str();
  sm->add_option("--seed", mx.seed)->required();
  sm->add_option("--steps", mx.steps)->capture_default_str();
  sm->add_option("--step-size", mx.step_size)->capture_default_str();
  sm->add_option("--norm", mx.norm, "gradient_rms or input_renorm")->capture_default_str();
  sm->add_option("--out", mx.out)->required();

  AttributeArgs at;
  auto* sb = app.add_subcommand("attribute", "DeepLIFT attribution for one window");
  sb->add_option("--model", at.model, "Weight file")->required();
  sb->add_option("--data", at.data)->required();
  sb->add_option("--record", at.record)->required();
  sb->add_option("--window", at.window, "Window index over all parts")->required();
  sb->add_flag("--logit", at.logit, "Attribute the logit instead of the probability");
  sb->add_option("--out", at.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*sp) cmd_prepare(prep);
    if (*st) cmd_train(tr);
    if (*se) cmd_evaluate(ev);
    if (*so) cmd_optimize(op);
    if (*sa) cmd_aggregate(ag);
    if (*sm) cmd_maximize(mx);
    if (*sb) cmd_attribute(at);
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what(), 1);
  } catch (const nlohmann::json::exception& e) {
    return fail("parse", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
