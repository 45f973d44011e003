#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "hierage/synth.hpp"
#include "hierage/trainer.hpp"

namespace hierage {

// Everything a run needs: dataset synthesis, split protocol and training.
//
// JSON schema (every key optional, defaults shown by `hierage config`):
//   data:          SyntheticConfig fields; gender/ethnicity as
//                  {"names": [...], "proportions": [...]}
//   split:         {"kind": "SE"|"RS", "train_fraction", "seed"}
//   model:         EncoderConfig fields (input_dim follows data.feature_dim
//                  when absent), "head_hidden_layers", "aggregation"
//                  ("encoder"|"average-pool"|"none"), "bin_first",
//                  "bin_size", "bin_count"
//   loss:          {"lambda_ce", "lambda_mean", "lambda_variance",
//                   "lambda_ensemble", "ensemble": "soft"|"hard"}
//   optimizer:     OptimizerConfig fields
//   augmentation:  AugmentationSpec fields
//   eval:          {"views", "seed"}
//   seed:          run seed
// Unknown keys are rejected.
struct RunConfig {
  SyntheticConfig data;
  SplitProtocol split;
  TrainConfig train;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& json);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& json);

RunConfig load_run_config(const std::filesystem::path& path);

// Applies "a.b.c=value" to a config document. The value is parsed as JSON
// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& document, const std::string& assignment);

}  // namespace hierage
