#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hierage/trainer.hpp"

namespace hierage {

enum class Grouping { kAgeRange, kGender, kEthnicity, kGenderEthnicity };

Grouping parse_grouping(const std::string& name);  // age-range|gender|ethnicity|gender-ethnicity
std::string to_string(Grouping grouping);

struct GroupRow {
  std::string key;
  std::size_t count = 0;
  std::optional<double> mae;  // empty for empty groups
  std::optional<double> std;  // std of absolute errors
};

struct BiasReport {
  Grouping grouping = Grouping::kAgeRange;
  std::vector<GroupRow> rows;
  std::size_t total = 0;
  double overall_mae = 0.0;
};

struct BiasOptions {
  double age_bin_width = 5.0;
  // Lower edge of the first age range; by default the largest multiple of
  // the width not above the smallest true age.
  std::optional<double> age_anchor;
  bool sample_std = false;  // divide by n - 1 instead of n
  // Demographic labels that must appear even without samples.
  std::vector<std::string> genders;
  std::vector<std::string> ethnicities;
};

// Groups absolute errors by key. Age ranges are [lo, lo + width) over the
// true age.
BiasReport group_report(const std::vector<Prediction>& predictions, Grouping grouping,
                        const BiasOptions& options = {});

void write_report_csv(const BiasReport& report, std::ostream& out);
void write_report_text(const BiasReport& report, std::ostream& out);

struct HistogramBin {
  double center = 0.0;
  std::size_t count = 0;
  double fraction = 0.0;
};

struct ErrorHistogram {
  double bin_width = 1.0;
  std::vector<HistogramBin> bins;  // contiguous, symmetric about 0
  std::vector<std::pair<double, double>> cumulative;  // (t, fraction with |e| <= t)
};

// Signed errors (predicted - true) binned on centers k * width.
ErrorHistogram error_histogram(const std::vector<Prediction>& predictions, double bin_width);

void write_histogram_csv(const ErrorHistogram& histogram, std::ostream& out);
void write_cumulative_csv(const ErrorHistogram& histogram, std::ostream& out);

}  // namespace hierage
