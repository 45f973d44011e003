#include "hierage/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "hierage/errors.hpp"

namespace hierage {

namespace {

constexpr std::size_t kViewCounts[] = {1, 2, 4, 6, 10, 15};

AblationCell encoder_cell(const RunConfig& base) {
  AblationCell cell;
  cell.layers = base.train.model.encoder.num_layers;
  cell.heads = base.train.model.encoder.num_heads;
  cell.bin_size = base.train.model.bin_size;
  return cell;
}

}  // namespace

std::vector<AblationCell> views_axis(const RunConfig& base) {
  std::vector<AblationCell> cells;
  AblationCell none = encoder_cell(base);
  none.axis = "views";
  none.setting = "K=1";
  none.aggregation = Aggregation::kNone;
  none.views = 1;
  cells.push_back(none);
  for (Aggregation aggregation : {Aggregation::kAveragePool, Aggregation::kEncoder}) {
    for (std::size_t k : kViewCounts) {
      AblationCell cell = encoder_cell(base);
      cell.axis = "views";
      cell.setting = "K=" + std::to_string(k);
      cell.aggregation = aggregation;
      cell.views = k;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::vector<AblationCell> ablation_matrix(const RunConfig& base) {
  std::vector<AblationCell> cells = views_axis(base);
  for (std::size_t depth : {2, 4, 8}) {
    AblationCell cell = encoder_cell(base);
    cell.axis = "depth";
    cell.setting = "layers=" + std::to_string(depth) + "/heads=" + std::to_string(depth);
    cell.layers = depth;
    cell.heads = depth;
    cells.push_back(cell);
  }
  for (double size : {1.0, 5.0, 10.0}) {
    AblationCell cell = encoder_cell(base);
    cell.axis = "bin-size";
    cell.setting = "bin=" + format_float(size);
    cell.bin_size = size;
    cells.push_back(cell);
  }
  return cells;
}

RunConfig apply_cell(const RunConfig& base, const AblationCell& cell) {
  RunConfig config = base;
  ModelConfig& m = config.train.model;
  m.aggregation = cell.aggregation;
  m.encoder.num_views = cell.views;
  m.encoder.num_layers = cell.layers;
  m.encoder.num_heads = cell.heads;
  if (cell.bin_size != base.train.model.bin_size) {
    const double span = static_cast<double>(base.train.model.bin_count) * base.train.model.bin_size;
    m.bin_count = static_cast<std::size_t>(std::ceil(span / cell.bin_size - 1e-9));
    m.bin_first = base.train.model.bin_first + (cell.bin_size - base.train.model.bin_size) / 2.0;
    m.bin_size = cell.bin_size;
  }
  m.validate();
  return config;
}

RunConfig with_seed(const RunConfig& base, std::uint64_t seed) {
  RunConfig config = base;
  config.data.seed = seed;
  config.split.seed = seed;
  config.train.seed = seed;
  config.train.optimizer.seed = seed;
  return config;
}

RunConfig quick_config() {
  RunConfig config;
  config.data.n_subjects = 60;
  config.data.samples_per_subject = 4;
  config.train.model.encoder.model_dim = 16;
  config.train.model.encoder.num_layers = 2;
  config.train.model.encoder.num_heads = 2;
  config.train.optimizer.epochs = 2;
  return config;
}

ExperimentResult run_experiment(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset data = generate_dataset(config.data);
  const auto [train_set, test_set] = split(data, config.split);
  if (test_set.empty()) throw ContractError("run_experiment: test split is empty");
  const TrainResult trained = train(train_set, nullptr, config.train);
  ExperimentResult result;
  result.test_mae = evaluate(trained.model, test_set, eval_options(config.train)).mae;
  result.train_samples = train_set.size();
  result.test_samples = test_set.size();
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "axis,setting,aggregation,K,layers,heads,bin_size,seeds,mae\n";
  for (const AblationRow& r : rows) {
    const AblationCell& c = r.cell;
    out << c.axis << ',' << c.setting << ',' << to_string(c.aggregation) << ',' << c.views << ','
        << c.layers << ',' << c.heads << ',' << format_float(c.bin_size) << ',' << r.maes.size()
        << ',' << format_float(r.median_mae) << '\n';
  }
}

}  // namespace hierage
