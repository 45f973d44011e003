#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hierage/model.hpp"
#include "hierage/optimizer.hpp"
#include "hierage/synth.hpp"

namespace hierage {

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  OptimizerConfig optimizer;
  AugmentationSpec augmentation;
  // Views per sample at evaluation time; 0 uses the training K. With 1 the
  // model sees only the original input.
  std::size_t eval_views = 0;
  std::uint64_t eval_seed = 7;
  std::uint64_t seed = 0;  // parameter init, shuffling, augmentation and dropout
};

// One row of the training log.
struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double cross_entropy = 0.0, mean = 0.0, variance = 0.0, ensemble = 0.0, total = 0.0;
  double train_mae = 0.0;  // running train-mode MAE over the epoch
  std::optional<double> val_mae;
};

struct Prediction {
  std::int64_t sample_id = 0;
  std::int64_t subject_id = 0;
  double true_age = 0.0;
  double predicted_age = 0.0;
  std::string gender;
  std::string ethnicity;
};

struct EvalResult {
  double mae = 0.0;
  std::vector<Prediction> predictions;
};

struct EvalOptions {
  std::size_t views = 0;  // 0: the model's K
  AugmentationSpec augmentation;
  std::uint64_t seed = 7;
  std::size_t batch_size = 64;
};

// Mean absolute error between two equally long sequences.
double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth);

// Eval-mode predictions for every sample; view sets are seeded per sample so
// results do not depend on batching.
EvalResult evaluate(const Model& model, const Dataset& dataset, const EvalOptions& options);

struct TrainResult {
  Model model;                     // parameters after the last epoch
  std::optional<Model> best_model;  // lowest validation MAE, when validating
  std::optional<double> best_val_mae;
  std::vector<EpochLog> log;
};

struct TrainHooks {
  // Called after each epoch; return false to stop.
  std::function<bool(const EpochLog&)> on_epoch;
  // When set, final.ckpt and best.ckpt are written here.
  std::optional<std::filesystem::path> checkpoint_dir;
};

// Batches: augment -> aggregate -> head -> weighted loss -> backward ->
// optimizer step under the cosine schedule. Deterministic given the seeds.
TrainResult train(const Dataset& train_set, const Dataset* validation, const TrainConfig& config,
                  const TrainHooks& hooks = {});

EvalOptions eval_options(const TrainConfig& config);

void write_training_log(const std::vector<EpochLog>& log, std::ostream& out);
void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

// sample_id,subject_id,true_age,predicted_age,gender,ethnicity
void write_predictions(const std::vector<Prediction>& predictions, std::ostream& out);
void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(std::istream& in, const std::string& source = "<stream>");
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace hierage
