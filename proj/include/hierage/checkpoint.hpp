#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hierage/model.hpp"

namespace hierage {

// Text checkpoint: magic line, version, model config as JSON, then every
// named parameter with its shape and values at full precision. Loading
// restores the parameters bit for bit.
void save_checkpoint(const Model& model, std::ostream& out);
void save_checkpoint(const Model& model, const std::filesystem::path& path);

Model load_checkpoint(std::istream& in, const std::string& source = "<stream>");
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace hierage
