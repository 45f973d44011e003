#include "hierage/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "csv.hpp"
#include "hierage/checkpoint.hpp"
#include "hierage/errors.hpp"

namespace hierage {

namespace {

// Seed salts for the independent random streams of one run.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kShuffleStream = 100;
constexpr std::uint64_t kAugmentStream = 1000000;

Tensor gather_views(const Dataset& data, std::span<const std::size_t> indices, std::size_t k,
                    const AugmentationSpec& spec, std::uint64_t seed) {
  const std::size_t f = data.feature_dim;
  std::vector<double> out;
  out.reserve(indices.size() * k * f);
  for (std::size_t i : indices) {
    const SubjectRecord& r = data.records[i];
    const Tensor views =
        augment(r.features, k, spec, mix_seed(seed, static_cast<std::uint64_t>(r.sample_id)));
    out.insert(out.end(), views.values().begin(), views.values().end());
  }
  return Tensor::matrix(indices.size() * k, f, std::move(out));
}

std::vector<double> ages_of(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<double> ages;
  ages.reserve(indices.size());
  for (std::size_t i : indices) ages.push_back(data.records[i].age);
  return ages;
}

}  // namespace

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("mean_absolute_error: length mismatch");
  if (predicted.empty()) throw ContractError("mean_absolute_error: no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) total += std::abs(predicted[i] - truth[i]);
  return total / static_cast<double>(predicted.size());
}

EvalOptions eval_options(const TrainConfig& config) {
  EvalOptions options;
  options.views = config.eval_views;
  options.augmentation = config.augmentation;
  options.seed = config.eval_seed;
  options.batch_size = std::max<std::size_t>(config.optimizer.batch_size, 1);
  return options;
}

EvalResult evaluate(const Model& model, const Dataset& dataset, const EvalOptions& options) {
  if (dataset.empty()) throw ContractError("evaluate: dataset is empty");
  if (dataset.feature_dim != model.config.encoder.input_dim) {
    throw ShapeError("evaluate: dataset has " + std::to_string(dataset.feature_dim) +
                     " features, model expects " + std::to_string(model.config.encoder.input_dim));
  }
  const std::size_t k = options.views == 0 ? model.config.encoder.num_views : options.views;
  const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
  EvalResult result;
  std::vector<double> predicted, truth;
  std::vector<std::size_t> indices;
  for (std::size_t lo = 0; lo < dataset.size(); lo += batch) {
    const std::size_t hi = std::min(dataset.size(), lo + batch);
    indices.resize(hi - lo);
    std::iota(indices.begin(), indices.end(), lo);
    Tape tape(false);
    const ForwardContext ctx{tape, Mode::kEval, nullptr};
    const Tensor views = gather_views(dataset, indices, k, options.augmentation, options.seed);
    const ForwardOutput out = forward(ctx, model, views, indices.size(), k);
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const SubjectRecord& r = dataset.records[indices[b]];
      result.predictions.push_back({r.sample_id, r.subject_id, r.age, out.prediction[b], r.gender,
                                    r.ethnicity});
      predicted.push_back(out.prediction[b]);
      truth.push_back(r.age);
    }
  }
  result.mae = mean_absolute_error(predicted, truth);
  return result;
}

TrainResult train(const Dataset& train_set, const Dataset* validation, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.model.validate();
  config.optimizer.validate();
  config.loss.weights.validate();
  config.augmentation.validate();
  if (train_set.empty()) throw ContractError("train: training set is empty");
  if (train_set.feature_dim != config.model.encoder.input_dim) {
    throw ShapeError("train: dataset has " + std::to_string(train_set.feature_dim) +
                     " features, model expects " + std::to_string(config.model.encoder.input_dim));
  }

  TrainResult result{Model::init(config.model, mix_seed(config.seed, kInitStream)), {}, {}, {}};
  Model& model = result.model;
  const AgeBins bins = config.model.bins();
  const std::size_t k = config.model.encoder.num_views;
  const OptimizerConfig& opt_config = config.optimizer;
  const std::size_t n = train_set.size();
  const std::size_t batch_size = opt_config.batch_size;
  const std::size_t batches = (n + batch_size - 1) / batch_size;
  const std::size_t total_steps =
      opt_config.total_steps != 0 ? opt_config.total_steps : opt_config.epochs * batches;

  Optimizer optimizer(model.parameters(), opt_config);
  std::mt19937_64 dropout_rng(mix_seed(config.seed, kDropoutStream));
  const EvalOptions eval = eval_options(config);

  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < opt_config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, kShuffleStream + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::uint64_t augment_seed = mix_seed(config.seed, kAugmentStream + epoch);

    EpochLog row;
    row.epoch = epoch + 1;
    double abs_error = 0.0;
    for (std::size_t lo = 0; lo < n; lo += batch_size) {
      const std::span<const std::size_t> indices(order.data() + lo, std::min(n, lo + batch_size) - lo);
      const double lr = cosine_lr(step, total_steps, opt_config.base_lr, opt_config.min_lr);
      row.lr = lr;
      LossValues values;
      try {
        Tape tape;
        const ForwardContext ctx{tape, Mode::kTrain, &dropout_rng};
        const Tensor views = gather_views(train_set, indices, k, config.augmentation, augment_seed);
        const ForwardOutput out = forward(ctx, model, views, indices.size(), k);
        const BatchLabels labels = BatchLabels::from_ages(ages_of(train_set, indices), bins);
        const Tensor loss = model_loss(tape, out, labels, bins, config.loss, &values);
        model.zero_grad();
        tape.backward(loss);
        optimizer.step(lr);
        for (std::size_t b = 0; b < indices.size(); ++b) {
          abs_error += std::abs(out.prediction[b] - labels.ages[b]);
        }
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(step + 1) + ": " + e.what());
      }
      ++step;
      const double w = static_cast<double>(indices.size()) / static_cast<double>(n);
      row.cross_entropy += w * values.cross_entropy;
      row.mean += w * values.mean;
      row.variance += w * values.variance;
      row.ensemble += w * values.ensemble;
      row.total += w * values.total;
    }
    row.step = step;
    row.train_mae = abs_error / static_cast<double>(n);
    if (validation != nullptr && !validation->empty()) {
      row.val_mae = evaluate(model, *validation, eval).mae;
      if (!result.best_val_mae || *row.val_mae < *result.best_val_mae) {
        result.best_val_mae = row.val_mae;
        result.best_model = model.clone();
      }
    }
    result.log.push_back(row);
    if (hooks.on_epoch && !hooks.on_epoch(row)) break;
  }

  if (hooks.checkpoint_dir) {
    save_checkpoint(model, *hooks.checkpoint_dir / "final.ckpt");
    save_checkpoint(result.best_model ? *result.best_model : model, *hooks.checkpoint_dir / "best.ckpt");
  }
  return result;
}

void write_training_log(const std::vector<EpochLog>& log, std::ostream& out) {
  out << "epoch,step,lr,ce,lm,lv,l2,total,train_mae,val_mae\n";
  for (const EpochLog& r : log) {
    out << r.epoch << ',' << r.step << ',' << format_float(r.lr) << ','
        << format_float(r.cross_entropy) << ',' << format_float(r.mean) << ','
        << format_float(r.variance) << ',' << format_float(r.ensemble) << ','
        << format_float(r.total) << ',' << format_float(r.train_mae) << ','
        << (r.val_mae ? format_float(*r.val_mae) : std::string()) << '\n';
  }
}

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_training_log(log, out);
}

void write_predictions(const std::vector<Prediction>& predictions, std::ostream& out) {
  out << "sample_id,subject_id,true_age,predicted_age,gender,ethnicity\n";
  char buf[32];
  for (const Prediction& p : predictions) {
    csv::check_tag(p.gender, "gender");
    csv::check_tag(p.ethnicity, "ethnicity");
    std::snprintf(buf, sizeof(buf), "%.17g", p.predicted_age);
    out << p.sample_id << ',' << p.subject_id << ',' << format_float(p.true_age) << ',' << buf
        << ',' << p.gender << ',' << p.ethnicity << '\n';
  }
}

void write_predictions(const std::vector<Prediction>& predictions,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_predictions(predictions, out);
}

std::vector<Prediction> read_predictions(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  const auto header = csv::split(csv::strip_cr(line));
  const char* required[] = {"sample_id", "subject_id", "true_age", "predicted_age"};
  std::vector<std::size_t> column(4, header.size());
  std::size_t gender_col = header.size(), ethnicity_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (std::size_t r = 0; r < 4; ++r)
      if (header[i] == required[r]) column[r] = i;
    if (header[i] == "gender") gender_col = i;
    if (header[i] == "ethnicity") ethnicity_col = i;
  }
  for (std::size_t r = 0; r < 4; ++r) {
    if (column[r] == header.size()) {
      throw ParseError(source, 1, std::string("missing column '") + required[r] + "'");
    }
  }
  std::vector<Prediction> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = csv::strip_cr(line);
    if (text.empty()) continue;
    const auto fields = csv::split(text);
    if (fields.size() != header.size()) {
      throw ParseError(source, line_no, "expected " + std::to_string(header.size()) +
                                            " fields, found " + std::to_string(fields.size()));
    }
    Prediction p;
    p.sample_id = csv::parse_int(fields[column[0]], source, line_no, "sample_id");
    p.subject_id = csv::parse_int(fields[column[1]], source, line_no, "subject_id");
    p.true_age = csv::parse_double(fields[column[2]], source, line_no, "true_age");
    p.predicted_age = csv::parse_double(fields[column[3]], source, line_no, "predicted_age");
    if (gender_col < fields.size()) p.gender = std::string(fields[gender_col]);
    if (ethnicity_col < fields.size()) p.ethnicity = std::string(fields[ethnicity_col]);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_predictions(in, path.string());
}

}  // namespace hierage
