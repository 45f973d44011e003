#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hierage/run_config.hpp"

namespace hierage {

// One configuration in the ablation matrix.
struct AblationCell {
  std::string axis;     // views, depth or bin-size
  std::string setting;  // human label, e.g. "K=10"
  Aggregation aggregation = Aggregation::kEncoder;
  std::size_t views = 10;
  std::size_t layers = 4;
  std::size_t heads = 4;
  double bin_size = 1.0;
};

// Views axis: none at K=1, encoder and average-pool at K in {1,2,4,6,10,15}.
// Depth axis: encoder at K=10 with layers = heads in {2,4,8}.
// Bin-size axis: encoder at K=10 with bin size in {1,5,10}.
std::vector<AblationCell> ablation_matrix(const RunConfig& base);

// Views axis only.
std::vector<AblationCell> views_axis(const RunConfig& base);

// Copy of `base` with the cell applied. Bins of size s keep the age range of
// the base bins: ceil(count / s) bins starting at first + (s - 1) / 2.
RunConfig apply_cell(const RunConfig& base, const AblationCell& cell);

// Same data, split and training seed for one replicate.
RunConfig with_seed(const RunConfig& base, std::uint64_t seed);

// Shrunk config for smoke runs.
RunConfig quick_config();

struct ExperimentResult {
  double test_mae = 0.0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  double seconds = 0.0;
};

// Synthesizes the dataset, splits it, trains on the train side (no model
// selection) and reports MAE of the final model on the test side.
ExperimentResult run_experiment(const RunConfig& config);

struct AblationRow {
  AblationCell cell;
  std::vector<double> maes;  // one per seed
  double median_mae = 0.0;
};

double median(std::vector<double> values);

// axis,setting,aggregation,K,layers,heads,bin_size,seeds,mae
void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out);

}  // namespace hierage
