#pragma once

// Minimal comma-separated helpers shared by the file readers. Fields never
// contain commas or quotes in the formats this project writes.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hierage/errors.hpp"

namespace hierage::csv {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline double parse_double(std::string_view field, const std::string& source, std::size_t line,
                           const char* column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(source, line,
                     std::string("column ") + column + ": '" + std::string(field) + "' is not a number");
  }
  return value;
}

inline std::int64_t parse_int(std::string_view field, const std::string& source, std::size_t line,
                              const char* column) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(source, line,
                     std::string("column ") + column + ": '" + std::string(field) + "' is not an integer");
  }
  return value;
}

inline void check_tag(const std::string& tag, const char* what) {
  if (tag.find_first_of(",\n\r\"") != std::string::npos) {
    throw ContractError(std::string(what) + " '" + tag + "' contains a reserved character");
  }
}

}  // namespace hierage::csv
