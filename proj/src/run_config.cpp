#include "hierage/run_config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "hierage/errors.hpp"

namespace hierage {

using nlohmann::json;

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ContractError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& value = j_.at(key);
    // nlohmann would wrap -3 into a huge size_t.
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0)) {
        throw ContractError("config: '" + name_ + "." + key + "' must be a non-negative integer");
      }
    }
    out = value.get<T>();
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ContractError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

json groups_to_json(const GroupProportions& g) {
  return {{"names", g.names}, {"proportions", g.proportions}};
}

GroupProportions groups_from_json(const json& j, const std::string& name) {
  GroupProportions g;
  Section s(j, name);
  s.get("names", g.names);
  s.get("proportions", g.proportions);
  s.finish();
  return g;
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"input_dim", c.encoder.input_dim},
          {"model_dim", c.encoder.model_dim},
          {"num_layers", c.encoder.num_layers},
          {"num_heads", c.encoder.num_heads},
          {"ffn_dim", c.encoder.ffn_dim},
          {"num_views", c.encoder.num_views},
          {"dropout", c.encoder.dropout},
          {"layer_norm_eps", c.encoder.layer_norm_eps},
          {"head_hidden_layers", c.head.hidden_layers},
          {"aggregation", to_string(c.aggregation)},
          {"bin_first", c.bin_first},
          {"bin_size", c.bin_size},
          {"bin_count", c.bin_count}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    Section s(j, "model");
    s.get("input_dim", c.encoder.input_dim);
    s.get("model_dim", c.encoder.model_dim);
    s.get("num_layers", c.encoder.num_layers);
    s.get("num_heads", c.encoder.num_heads);
    s.get("ffn_dim", c.encoder.ffn_dim);
    s.get("num_views", c.encoder.num_views);
    s.get("dropout", c.encoder.dropout);
    s.get("layer_norm_eps", c.encoder.layer_norm_eps);
    s.get("head_hidden_layers", c.head.hidden_layers);
    std::string aggregation = to_string(c.aggregation);
    s.get("aggregation", aggregation);
    c.aggregation = parse_aggregation(aggregation);
    s.get("bin_first", c.bin_first);
    s.get("bin_size", c.bin_size);
    s.get("bin_count", c.bin_count);
    s.finish();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: model: ") + e.what());
  }
  return c;
}

json to_json(const RunConfig& c) {
  const SyntheticConfig& d = c.data;
  const TrainConfig& t = c.train;
  const OptimizerConfig& o = t.optimizer;
  const AugmentationSpec& a = t.augmentation;
  return {
      {"data",
       {{"n_subjects", d.n_subjects},
        {"samples_per_subject", d.samples_per_subject},
        {"feature_dim", d.feature_dim},
        {"age_signal_dims", d.age_signal_dims},
        {"noise_sigma", d.noise_sigma},
        {"subject_sigma", d.subject_sigma},
        {"group_shift", d.group_shift},
        {"min_age", d.min_age},
        {"max_age", d.max_age},
        {"age_span", d.age_span},
        {"gender", groups_to_json(d.gender)},
        {"ethnicity", groups_to_json(d.ethnicity)},
        {"seed", d.seed}}},
      {"split",
       {{"kind", to_string(c.split.kind)},
        {"train_fraction", c.split.train_fraction},
        {"seed", c.split.seed}}},
      {"model", model_config_to_json(t.model)},
      {"loss",
       {{"lambda_ce", t.loss.weights.cross_entropy},
        {"lambda_mean", t.loss.weights.mean},
        {"lambda_variance", t.loss.weights.variance},
        {"lambda_ensemble", t.loss.weights.ensemble},
        {"ensemble", t.loss.ensemble == EnsembleMode::kSoft ? "soft" : "hard"}}},
      {"optimizer",
       {{"base_lr", o.base_lr},
        {"min_lr", o.min_lr},
        {"beta1", o.beta1},
        {"beta2", o.beta2},
        {"eps", o.eps},
        {"rectified_warmup", o.rectified_warmup},
        {"warmup_sgd_fallback", o.warmup_sgd_fallback},
        {"lookahead", o.lookahead},
        {"lookahead_k", o.lookahead_k},
        {"lookahead_alpha", o.lookahead_alpha},
        {"batch_size", o.batch_size},
        {"epochs", o.epochs},
        {"total_steps", o.total_steps}}},
      {"augmentation",
       {{"noise_probability", a.noise_probability},
        {"noise_sigma", a.noise_sigma},
        {"mask_probability", a.mask_probability},
        {"mask_fraction", a.mask_fraction},
        {"scale_probability", a.scale_probability},
        {"scale_min", a.scale_min},
        {"scale_max", a.scale_max},
        {"swap_probability", a.swap_probability},
        {"include_original", a.include_original}}},
      {"eval", {{"views", t.eval_views}, {"seed", t.eval_seed}}},
      {"seed", t.seed}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    Section root(j, "config");
    if (root.has("data")) {
      Section s(root.at("data"), "data");
      SyntheticConfig& d = c.data;
      s.get("n_subjects", d.n_subjects);
      s.get("samples_per_subject", d.samples_per_subject);
      s.get("feature_dim", d.feature_dim);
      s.get("age_signal_dims", d.age_signal_dims);
      s.get("noise_sigma", d.noise_sigma);
      s.get("subject_sigma", d.subject_sigma);
      s.get("group_shift", d.group_shift);
      s.get("min_age", d.min_age);
      s.get("max_age", d.max_age);
      s.get("age_span", d.age_span);
      if (s.has("gender")) d.gender = groups_from_json(s.at("gender"), "data.gender");
      if (s.has("ethnicity")) d.ethnicity = groups_from_json(s.at("ethnicity"), "data.ethnicity");
      s.get("seed", d.seed);
      s.finish();
    }
    if (root.has("split")) {
      Section s(root.at("split"), "split");
      std::string kind = to_string(c.split.kind);
      s.get("kind", kind);
      c.split.kind = parse_split_kind(kind);
      s.get("train_fraction", c.split.train_fraction);
      s.get("seed", c.split.seed);
      s.finish();
    }
    TrainConfig& t = c.train;
    t.model.encoder.input_dim = c.data.feature_dim;
    if (root.has("model")) {
      json model = root.at("model");
      if (!model.contains("input_dim")) model["input_dim"] = c.data.feature_dim;
      t.model = model_config_from_json(model);
    }
    if (root.has("loss")) {
      Section s(root.at("loss"), "loss");
      s.get("lambda_ce", t.loss.weights.cross_entropy);
      s.get("lambda_mean", t.loss.weights.mean);
      s.get("lambda_variance", t.loss.weights.variance);
      s.get("lambda_ensemble", t.loss.weights.ensemble);
      std::string mode = "soft";
      s.get("ensemble", mode);
      if (mode != "soft" && mode != "hard") {
        throw ContractError("config: loss.ensemble must be 'soft' or 'hard'");
      }
      t.loss.ensemble = mode == "soft" ? EnsembleMode::kSoft : EnsembleMode::kHard;
      s.finish();
    }
    if (root.has("optimizer")) {
      Section s(root.at("optimizer"), "optimizer");
      OptimizerConfig& o = t.optimizer;
      s.get("base_lr", o.base_lr);
      s.get("min_lr", o.min_lr);
      s.get("beta1", o.beta1);
      s.get("beta2", o.beta2);
      s.get("eps", o.eps);
      s.get("rectified_warmup", o.rectified_warmup);
      s.get("warmup_sgd_fallback", o.warmup_sgd_fallback);
      s.get("lookahead", o.lookahead);
      s.get("lookahead_k", o.lookahead_k);
      s.get("lookahead_alpha", o.lookahead_alpha);
      s.get("batch_size", o.batch_size);
      s.get("epochs", o.epochs);
      s.get("total_steps", o.total_steps);
      s.finish();
    }
    if (root.has("augmentation")) {
      Section s(root.at("augmentation"), "augmentation");
      AugmentationSpec& a = t.augmentation;
      s.get("noise_probability", a.noise_probability);
      s.get("noise_sigma", a.noise_sigma);
      s.get("mask_probability", a.mask_probability);
      s.get("mask_fraction", a.mask_fraction);
      s.get("scale_probability", a.scale_probability);
      s.get("scale_min", a.scale_min);
      s.get("scale_max", a.scale_max);
      s.get("swap_probability", a.swap_probability);
      s.get("include_original", a.include_original);
      s.finish();
    }
    if (root.has("eval")) {
      Section s(root.at("eval"), "eval");
      s.get("views", t.eval_views);
      s.get("seed", t.eval_seed);
      s.finish();
    }
    root.get("seed", t.seed);
    t.optimizer.seed = t.seed;
    root.finish();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  c.data.validate();
  c.train.model.validate();
  c.train.optimizer.validate();
  c.train.loss.weights.validate();
  c.train.augmentation.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ContractError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void apply_override(json& document, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ContractError("override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::string pointer = "/";
  for (char ch : path) pointer += ch == '.' ? '/' : ch;
  document[json::json_pointer(pointer)] = value;
}

}  // namespace hierage
