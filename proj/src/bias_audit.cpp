#include "hierage/bias_audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

#include "hierage/errors.hpp"
#include "hierage/synth.hpp"

namespace hierage {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::vector<std::string> labels(const std::vector<Prediction>& predictions,
                                const std::vector<std::string>& declared,
                                std::string Prediction::*field) {
  std::vector<std::string> out = declared;
  std::set<std::string> seen(declared.begin(), declared.end());
  std::set<std::string> extra;
  for (const Prediction& p : predictions) {
    if (!seen.count(p.*field)) extra.insert(p.*field);
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

}  // namespace

Grouping parse_grouping(const std::string& name) {
  if (name == "age-range") return Grouping::kAgeRange;
  if (name == "gender") return Grouping::kGender;
  if (name == "ethnicity") return Grouping::kEthnicity;
  if (name == "gender-ethnicity" || name == "gender×ethnicity") return Grouping::kGenderEthnicity;
  throw ContractError("unknown grouping '" + name +
                      "' (expected age-range, gender, ethnicity or gender-ethnicity)");
}

std::string to_string(Grouping grouping) {
  switch (grouping) {
    case Grouping::kAgeRange: return "age-range";
    case Grouping::kGender: return "gender";
    case Grouping::kEthnicity: return "ethnicity";
    case Grouping::kGenderEthnicity: return "gender-ethnicity";
  }
  return "?";
}

BiasReport group_report(const std::vector<Prediction>& predictions, Grouping grouping,
                        const BiasOptions& options) {
  if (predictions.empty()) throw ContractError("group_report: no predictions");
  if (!(options.age_bin_width > 0.0)) throw ContractError("group_report: age_bin_width must be positive");

  BiasReport report;
  report.grouping = grouping;
  report.total = predictions.size();

  std::vector<std::string> keys;
  std::vector<std::size_t> assignment(predictions.size());

  if (grouping == Grouping::kAgeRange) {
    const double w = options.age_bin_width;
    double lo_age = predictions[0].true_age, hi_age = predictions[0].true_age;
    for (const Prediction& p : predictions) {
      lo_age = std::min(lo_age, p.true_age);
      hi_age = std::max(hi_age, p.true_age);
    }
    const double anchor = options.age_anchor ? *options.age_anchor : std::floor(lo_age / w) * w;
    if (lo_age < anchor) throw ContractError("group_report: a true age lies below the age anchor");
    const auto index = [&](double age) {
      return static_cast<std::size_t>(std::floor((age - anchor) / w));
    };
    const std::size_t n_ranges = index(hi_age) + 1;
    for (std::size_t r = 0; r < n_ranges; ++r) {
      const double lo = anchor + static_cast<double>(r) * w;
      keys.push_back(number(lo) + "-" + number(lo + w));
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) assignment[i] = index(predictions[i].true_age);
  } else {
    std::vector<std::string> genders = labels(predictions, options.genders, &Prediction::gender);
    std::vector<std::string> ethnicities =
        labels(predictions, options.ethnicities, &Prediction::ethnicity);
    std::map<std::string, std::size_t> slot;
    const auto key_of = [&](const Prediction& p) {
      switch (grouping) {
        case Grouping::kGender: return p.gender;
        case Grouping::kEthnicity: return p.ethnicity;
        default: return p.gender + "/" + p.ethnicity;
      }
    };
    if (grouping == Grouping::kGender) keys = genders;
    if (grouping == Grouping::kEthnicity) keys = ethnicities;
    if (grouping == Grouping::kGenderEthnicity) {
      for (const auto& g : genders)
        for (const auto& e : ethnicities) keys.push_back(g + "/" + e);
    }
    for (std::size_t k = 0; k < keys.size(); ++k) slot.emplace(keys[k], k);
    for (std::size_t i = 0; i < predictions.size(); ++i) assignment[i] = slot.at(key_of(predictions[i]));
  }

  std::vector<std::vector<double>> errors(keys.size());
  double total_error = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = std::abs(predictions[i].predicted_age - predictions[i].true_age);
    errors[assignment[i]].push_back(e);
    total_error += e;
  }
  report.overall_mae = total_error / static_cast<double>(predictions.size());

  for (std::size_t k = 0; k < keys.size(); ++k) {
    GroupRow row;
    row.key = keys[k];
    row.count = errors[k].size();
    if (row.count > 0) {
      double sum = 0.0;
      for (double e : errors[k]) sum += e;
      const double mean = sum / static_cast<double>(row.count);
      double ss = 0.0;
      for (double e : errors[k]) ss += (e - mean) * (e - mean);
      row.mae = mean;
      if (!options.sample_std) {
        row.std = std::sqrt(ss / static_cast<double>(row.count));
      } else if (row.count > 1) {
        row.std = std::sqrt(ss / static_cast<double>(row.count - 1));
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report_csv(const BiasReport& report, std::ostream& out) {
  out << "group,count,mae,std\n";
  for (const GroupRow& r : report.rows) {
    out << r.key << ',' << r.count << ',' << (r.mae ? format_float(*r.mae) : "") << ','
        << (r.std ? format_float(*r.std) : "") << '\n';
  }
  out << "overall," << report.total << ',' << format_float(report.overall_mae) << ",\n";
}

void write_report_text(const BiasReport& report, std::ostream& out) {
  const std::string title =
      report.grouping == Grouping::kAgeRange ? "Age (true)" : to_string(report.grouping);
  std::size_t width = std::max<std::size_t>(title.size(), 7);
  for (const GroupRow& r : report.rows) width = std::max(width, r.key.size());
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s  %8s  %6s  %6s\n", static_cast<int>(width), title.c_str(),
                "Samples", "MAE", "Std");
  out << line;
  for (const GroupRow& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-*s  %8zu  %6s  %6s\n", static_cast<int>(width), r.key.c_str(),
                  r.count, r.mae ? fixed(*r.mae).c_str() : "", r.std ? fixed(*r.std).c_str() : "");
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-*s  %8zu  %6s\n", static_cast<int>(width), "Overall",
                report.total, fixed(report.overall_mae).c_str());
  out << line;
}

ErrorHistogram error_histogram(const std::vector<Prediction>& predictions, double bin_width) {
  if (!(bin_width > 0.0)) throw ContractError("error_histogram: bin_width must be positive");
  if (predictions.empty()) throw ContractError("error_histogram: no predictions");
  ErrorHistogram h;
  h.bin_width = bin_width;
  std::vector<long long> index;
  long long reach = 0;
  for (const Prediction& p : predictions) {
    const double e = p.predicted_age - p.true_age;
    const long long k = std::llround(e / bin_width);
    index.push_back(k);
    reach = std::max(reach, std::llabs(k));
  }
  const double n = static_cast<double>(predictions.size());
  std::vector<std::size_t> counts(static_cast<std::size_t>(2 * reach + 1), 0);
  for (long long k : index) ++counts[static_cast<std::size_t>(k + reach)];
  for (long long k = -reach; k <= reach; ++k) {
    const std::size_t c = counts[static_cast<std::size_t>(k + reach)];
    h.bins.push_back({static_cast<double>(k) * bin_width, c, static_cast<double>(c) / n});
  }
  for (double t : {1.0, 2.0, 3.0, 5.0}) {
    std::size_t within = 0;
    for (const Prediction& p : predictions) {
      if (std::abs(p.predicted_age - p.true_age) <= t) ++within;
    }
    h.cumulative.emplace_back(t, static_cast<double>(within) / n);
  }
  return h;
}

void write_histogram_csv(const ErrorHistogram& histogram, std::ostream& out) {
  out << "bin_center,count,fraction\n";
  for (const HistogramBin& b : histogram.bins) {
    out << format_float(b.center) << ',' << b.count << ',' << format_float(b.fraction) << '\n';
  }
}

void write_cumulative_csv(const ErrorHistogram& histogram, std::ostream& out) {
  out << "threshold,fraction_within\n";
  for (const auto& [t, f] : histogram.cumulative) out << format_float(t) << ',' << format_float(f) << '\n';
}

}  // namespace hierage
