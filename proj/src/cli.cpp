#include "hierage/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hierage/ablation.hpp"
#include "hierage/bias_audit.hpp"
#include "hierage/checkpoint.hpp"
#include "hierage/errors.hpp"
#include "hierage/gradient_suite.hpp"
#include "hierage/run_config.hpp"

namespace hierage {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for a failed self-check; maps to exit code 2.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON run config (or a manifest written by a previous run)");
  cmd->add_option("--set", o.overrides, "Override a config value, e.g. --set optimizer.epochs=5");
  cmd->add_option("--seed", o.seed, "Seed for data synthesis, split and training");
  cmd->add_option("--out", o.out_dir, "Output directory")->required();
}

json base_document(const CommonOptions& o, const RunConfig& defaults) {
  if (o.config_path.empty()) return to_json(defaults);
  std::ifstream in(o.config_path);
  if (!in) throw IoError("cannot open config " + o.config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ContractError("config " + o.config_path + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) doc = doc["config"];
  return to_json(run_config_from_json(doc));
}

RunConfig resolve(const CommonOptions& o, const RunConfig& defaults = {}) {
  json doc = base_document(o, defaults);
  for (const std::string& assignment : o.overrides) apply_override(doc, assignment);
  RunConfig config = run_config_from_json(doc);
  if (o.seed) config = with_seed(config, *o.seed);
  return config;
}

fs::path prepare_out(const std::string& dir) {
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return out;
}

void write_json(const fs::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << value.dump(2) << '\n';
}

void write_manifest(const fs::path& out, const std::string& command, const json& config,
                    const json& arguments) {
  write_json(out / "manifest.json", {{"command", command},
                                     {"config", config},
                                     {"arguments", arguments},
                                     {"versions", {{"hierage", kVersion}, {"checkpoint_format", 1}}}});
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  writer(out);
}

Dataset load_or_synthesize(const std::string& data_path, RunConfig& config) {
  if (data_path.empty()) return generate_dataset(config.data);
  Dataset data = read_dataset(fs::path(data_path));
  config.train.model.encoder.input_dim = data.feature_dim;
  return data;
}

int run_synth(const CommonOptions& o, std::ostream& out) {
  const RunConfig config = resolve(o);
  const fs::path dir = prepare_out(o.out_dir);
  const Dataset data = generate_dataset(config.data);
  write_dataset(data, dir / "dataset.csv");
  write_manifest(dir, "synth", to_json(config), json::object());
  out << "wrote " << data.size() << " samples to " << (dir / "dataset.csv").string() << '\n';
  return 0;
}

int run_train(const CommonOptions& o, const std::string& data_path, std::ostream& out) {
  RunConfig config = resolve(o);
  const fs::path dir = prepare_out(o.out_dir);
  const Dataset data = load_or_synthesize(data_path, config);
  const auto [train_set, val_set] = split(data, config.split);
  write_manifest(dir, "train", to_json(config), {{"data", data_path}});

  TrainHooks hooks;
  hooks.checkpoint_dir = dir;
  hooks.on_epoch = [&out](const EpochLog& row) {
    out << "epoch " << row.epoch << " loss " << format_float(row.total) << " train_mae "
        << format_float(row.train_mae);
    if (row.val_mae) out << " val_mae " << format_float(*row.val_mae);
    out << '\n';
    return true;
  };
  const TrainResult result = train(train_set, val_set.empty() ? nullptr : &val_set, config.train, hooks);
  write_training_log(result.log, dir / "train_log.csv");

  json metrics = {{"train_samples", train_set.size()}, {"val_samples", val_set.size()}};
  if (!val_set.empty()) {
    const EvalResult final_eval = evaluate(result.model, val_set, eval_options(config.train));
    write_predictions(final_eval.predictions, dir / "predictions.csv");
    metrics["val_mae"] = final_eval.mae;
    metrics["best_val_mae"] = *result.best_val_mae;
    out << "val MAE " << format_float(final_eval.mae) << " (best "
        << format_float(*result.best_val_mae) << ")\n";
  }
  write_json(dir / "metrics.json", metrics);
  return 0;
}

int run_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& data_path,
             const std::string& side, std::ostream& out) {
  RunConfig config = resolve(o);
  if (side != "test" && side != "train" && side != "all") {
    throw ContractError("--side must be test, train or all");
  }
  const fs::path dir = prepare_out(o.out_dir);
  const Model model = load_checkpoint(fs::path(checkpoint));
  config.train.model = model.config;
  Dataset data = load_or_synthesize(data_path, config);
  if (side != "all") {
    auto parts = split(data, config.split);
    data = side == "test" ? std::move(parts.second) : std::move(parts.first);
  }
  write_manifest(dir, "eval", to_json(config),
                 {{"checkpoint", checkpoint}, {"data", data_path}, {"side", side}});
  const EvalResult result = evaluate(model, data, eval_options(config.train));
  write_predictions(result.predictions, dir / "predictions.csv");
  write_json(dir / "metrics.json", {{"mae", result.mae}, {"samples", data.size()}});
  out << "MAE " << format_float(result.mae) << " over " << data.size() << " samples\n";
  return 0;
}

int run_ablate(const CommonOptions& o, bool quick, std::size_t seeds, const std::string& axis,
               std::ostream& out) {
  const RunConfig base = resolve(o, quick ? quick_config() : RunConfig{});
  const std::string chosen = axis.empty() ? (quick ? "views" : "all") : axis;
  std::vector<AblationCell> cells;
  if (chosen == "views") {
    cells = views_axis(base);
  } else if (chosen == "all" || chosen == "depth" || chosen == "bin-size") {
    for (const AblationCell& c : ablation_matrix(base)) {
      if (chosen == "all" || c.axis == chosen) cells.push_back(c);
    }
  } else {
    throw ContractError("--axis must be all, views, depth or bin-size");
  }
  if (seeds == 0) throw ContractError("--seeds must be at least 1");
  const std::uint64_t first_seed = o.seed.value_or(base.train.seed);
  const fs::path dir = prepare_out(o.out_dir);
  write_manifest(dir, "ablate", to_json(base),
                 {{"quick", quick}, {"seeds", seeds}, {"axis", chosen}, {"first_seed", first_seed}});

  std::ofstream runs(dir / "ablation_runs.csv", std::ios::binary);
  if (!runs) throw IoError("cannot write ablation_runs.csv");
  runs << "axis,setting,aggregation,K,layers,heads,bin_size,seed,mae,seconds\n";
  std::vector<AblationRow> rows;
  for (const AblationCell& cell : cells) {
    AblationRow row{cell, {}, 0.0};
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::uint64_t seed = first_seed + s;
      const ExperimentResult r = run_experiment(with_seed(apply_cell(base, cell), seed));
      row.maes.push_back(r.test_mae);
      runs << cell.axis << ',' << cell.setting << ',' << to_string(cell.aggregation) << ','
           << cell.views << ',' << cell.layers << ',' << cell.heads << ','
           << format_float(cell.bin_size) << ',' << seed << ',' << format_float(r.test_mae) << ','
           << format_float(r.seconds) << '\n';
      runs.flush();
    }
    row.median_mae = median(row.maes);
    out << cell.axis << ' ' << to_string(cell.aggregation) << ' ' << cell.setting << " MAE "
        << format_float(row.median_mae) << '\n';
    rows.push_back(std::move(row));
  }
  write_file(dir / "ablation.csv", [&](std::ostream& s) { write_ablation_csv(rows, s); });
  return 0;
}

int run_bias(const std::string& predictions_path, const std::string& out_dir,
             const std::vector<std::string>& groupings, double width, std::optional<double> anchor,
             double hist_width, bool sample_std, std::ostream& out) {
  const auto predictions = read_predictions(fs::path(predictions_path));
  BiasOptions options;
  options.age_bin_width = width;
  options.age_anchor = anchor;
  options.sample_std = sample_std;
  options.genders = morph_gender_mix().names;
  options.ethnicities = morph_ethnicity_mix().names;
  std::vector<Grouping> chosen;
  for (const std::string& g : groupings) chosen.push_back(parse_grouping(g));
  if (chosen.empty()) {
    chosen = {Grouping::kAgeRange, Grouping::kGender, Grouping::kEthnicity, Grouping::kGenderEthnicity};
  }
  const ErrorHistogram histogram = error_histogram(predictions, hist_width);

  const fs::path dir = prepare_out(out_dir);
  json arguments = {{"predictions", predictions_path}, {"age_bin_width", width},
                    {"histogram_width", hist_width},   {"sample_std", sample_std},
                    {"groupings", groupings}};
  if (anchor) arguments["age_anchor"] = *anchor;
  write_manifest(dir, "bias", json::object(), arguments);

  for (Grouping g : chosen) {
    const BiasReport report = group_report(predictions, g, options);
    const std::string stem = "bias_" + to_string(g);
    write_file(dir / (stem + ".csv"), [&](std::ostream& s) { write_report_csv(report, s); });
    write_file(dir / (stem + ".txt"), [&](std::ostream& s) { write_report_text(report, s); });
    write_report_text(report, out);
    out << '\n';
  }
  write_file(dir / "error_histogram.csv", [&](std::ostream& s) { write_histogram_csv(histogram, s); });
  write_file(dir / "error_cumulative.csv", [&](std::ostream& s) { write_cumulative_csv(histogram, s); });
  for (const auto& [t, f] : histogram.cumulative) {
    out << "|error| <= " << format_float(t) << ": " << format_float(100.0 * f) << "%\n";
  }
  return 0;
}

int run_gradcheck(const std::string& out_dir, std::uint64_t seed, double eps, std::ostream& out) {
  GradientSuiteConfig config;
  config.seed = seed;
  config.eps = eps;
  const fs::path dir = prepare_out(out_dir);
  write_manifest(dir, "gradcheck", json::object(), {{"seed", seed}, {"eps", eps}});
  constexpr double kTolerance = 1e-4;
  double worst = 0.0;
  json results = json::object();
  for (const GradientTermResult& r : run_gradient_suite(config)) {
    out << r.term << " max_rel_error " << format_float(r.report.max_rel_error) << '\n';
    results[r.term] = r.report.max_rel_error;
    worst = std::max(worst, r.report.max_rel_error);
  }
  write_json(dir / "gradcheck.json", results);
  if (!(worst < kTolerance)) {
    throw CheckFailed("gradient check failed: max relative error " + format_float(worst));
  }
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Age estimation from aggregated augmented views", args.empty() ? "hierage" : args[0]};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions common;

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  add_common(synth, common);

  std::string data_path;
  CLI::App* train_cmd = app.add_subcommand("train", "Train one model and evaluate on the held-out split");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data_path, "Dataset CSV (synthesized from the config when absent)");

  std::string checkpoint, side = "test";
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_path, "Dataset CSV (synthesized from the config when absent)");
  eval_cmd->add_option("--side", side, "Split side to evaluate: test, train or all");

  bool quick = false;
  std::size_t seeds = 5;
  std::string axis;
  CLI::App* ablate = app.add_subcommand("ablate", "Run the ablation matrix");
  add_common(ablate, common);
  ablate->add_flag("--quick", quick, "Small preset (views axis, one seed unless --seeds is given)");
  CLI::Option* seeds_opt = ablate->add_option("--seeds", seeds, "Replicates per cell (median reported)");
  ablate->add_option("--axis", axis, "all, views, depth or bin-size");

  std::string predictions, bias_out;
  std::vector<std::string> groupings;
  double width = 5.0, hist_width = 1.0;
  std::optional<double> anchor;
  bool sample_std = false;
  CLI::App* bias = app.add_subcommand("bias", "Per-group error report from a predictions file");
  bias->add_option("--predictions", predictions, "Predictions CSV")->required();
  bias->add_option("--out", bias_out, "Output directory")->required();
  bias->add_option("--grouping", groupings, "age-range, gender, ethnicity or gender-ethnicity (default: all)");
  bias->add_option("--age-width", width, "Width of the age ranges");
  bias->add_option("--age-anchor", anchor, "Lower edge of the first age range");
  bias->add_option("--hist-width", hist_width, "Error histogram bin width");
  bias->add_flag("--sample-std", sample_std, "Use the n - 1 standard deviation");

  std::string grad_out;
  std::uint64_t grad_seed = 0;
  double eps = 1e-6;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss term");
  gradcheck->add_option("--out", grad_out, "Output directory")->required();
  gradcheck->add_option("--seed", grad_seed, "Seed for the random model and batch");
  gradcheck->add_option("--eps", eps, "Finite-difference step");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("hierage");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(common, out);
    if (train_cmd->parsed()) return run_train(common, data_path, out);
    if (eval_cmd->parsed()) return run_eval(common, checkpoint, data_path, side, out);
    if (ablate->parsed()) return run_ablate(common, quick, quick && seeds_opt->count() == 0 ? 1 : seeds, axis, out);
    if (bias->parsed()) {
      return run_bias(predictions, bias_out, groupings, width, anchor, hist_width, sample_std, out);
    }
    if (gradcheck->parsed()) return run_gradcheck(grad_out, grad_seed, eps, out);
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace hierage
