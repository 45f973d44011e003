#include "hierage/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "csv.hpp"
#include "hierage/errors.hpp"
#include "hierage/run_config.hpp"

namespace hierage {

namespace {

constexpr const char* kMagic = "HIERAGE_CHECKPOINT";
constexpr int kVersion = 1;

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
  const auto named = model.named_parameters();
  out << kMagic << '\n'
      << "version " << kVersion << '\n'
      << "config " << model_config_to_json(model.config).dump() << '\n'
      << "params " << named.size() << '\n';
  char buf[32];
  for (const auto& [name, tensor] : named) {
    out << "param " << name << ' ' << tensor.shape().size();
    for (std::size_t d : tensor.shape()) out << ' ' << d;
    out << '\n';
    bool first = true;
    for (double v : tensor.values()) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << (first ? "" : " ") << buf;
      first = false;
    }
    out << '\n';
  }
  if (!out) throw IoError("checkpoint: write failed");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_checkpoint(model, out);
}

Model load_checkpoint(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](const char* what) -> std::string_view {
    if (!std::getline(in, line)) throw ParseError(source, line_no + 1, std::string("missing ") + what);
    ++line_no;
    return csv::strip_cr(line);
  };

  if (next("magic line") != kMagic) throw ParseError(source, line_no, "not a checkpoint file");
  {
    const auto w = words(next("version"));
    if (w.size() != 2 || w[0] != "version") throw ParseError(source, line_no, "expected 'version N'");
    const auto version = csv::parse_int(w[1], source, line_no, "version");
    if (version != kVersion) {
      throw ParseError(source, line_no, "unsupported checkpoint version " + std::to_string(version));
    }
  }
  ModelConfig config;
  {
    const std::string_view text = next("config");
    if (text.substr(0, 7) != "config ") throw ParseError(source, line_no, "expected 'config {...}'");
    try {
      config = model_config_from_json(nlohmann::json::parse(text.substr(7)));
      config.validate();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const ContractError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  Model model = Model::init(config, 0);
  std::map<std::string, Tensor> by_name;
  for (const auto& [name, tensor] : model.named_parameters()) by_name.emplace(name, tensor);

  std::size_t count = 0;
  {
    const auto w = words(next("params"));
    if (w.size() != 2 || w[0] != "params") throw ParseError(source, line_no, "expected 'params N'");
    count = static_cast<std::size_t>(csv::parse_int(w[1], source, line_no, "params"));
  }
  if (count != by_name.size()) {
    throw ParseError(source, line_no, "expected " + std::to_string(by_name.size()) +
                                          " parameters, found " + std::to_string(count));
  }
  for (std::size_t p = 0; p < count; ++p) {
    const auto w = words(next("param header"));
    if (w.size() < 3 || w[0] != "param") throw ParseError(source, line_no, "expected 'param NAME RANK DIMS'");
    const std::string name(w[1]);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError(source, line_no, "unknown parameter '" + name + "'");
    const auto rank = static_cast<std::size_t>(csv::parse_int(w[2], source, line_no, "rank"));
    if (w.size() != 3 + rank) throw ParseError(source, line_no, "dimension count does not match rank");
    Shape shape;
    for (std::size_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(csv::parse_int(w[3 + r], source, line_no, "dim")));
    }
    Tensor& target = it->second;
    if (shape != target.shape()) {
      throw ParseError(source, line_no, "parameter '" + name + "' has shape " + shape_to_string(shape) +
                                            ", config implies " + shape_to_string(target.shape()));
    }
    const auto values = words(next("parameter values"));
    if (values.size() != target.size()) {
      throw ParseError(source, line_no, "parameter '" + name + "' expects " +
                                            std::to_string(target.size()) + " values");
    }
    auto dst = target.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      dst[i] = csv::parse_double(values[i], source, line_no, name.c_str());
    }
    by_name.erase(it);
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_checkpoint(in, path.string());
}

}  // namespace hierage
