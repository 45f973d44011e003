#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "hierage/bias_audit.hpp"
#include "hierage/errors.hpp"
#include "hierage/run_config.hpp"

using namespace hierage;

namespace {

Prediction pred(double truth, double predicted, std::string gender = "M",
                std::string ethnicity = "Black") {
  Prediction p;
  p.true_age = truth;
  p.predicted_age = predicted;
  p.gender = std::move(gender);
  p.ethnicity = std::move(ethnicity);
  return p;
}

std::vector<Prediction> random_predictions(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> age(16.0, 77.0);
  std::normal_distribution<double> err(0.0, 3.0);
  std::bernoulli_distribution male(0.85);
  const std::vector<std::string> eth{"Black", "White", "Hispanic", "Asian", "Other"};
  std::discrete_distribution<int> pick({0.77, 0.19, 0.03, 0.005, 0.005});
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = age(rng);
    Prediction p = pred(a, a + err(rng), male(rng) ? "M" : "F", eth[pick(rng)]);
    p.sample_id = static_cast<std::int64_t>(i);
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST(GroupReport, TwoGroupsWorkedExample) {
  const std::vector<Prediction> p{pred(20, 21, "M"), pred(30, 29, "M"), pred(40, 43, "F")};
  const BiasReport r = group_report(p, Grouping::kGender);
  ASSERT_EQ(r.rows.size(), 2u);
  std::map<std::string, GroupRow> by_key;
  for (const auto& row : r.rows) by_key[row.key] = row;
  EXPECT_EQ(*by_key["M"].mae, 1.0);
  EXPECT_EQ(*by_key["F"].mae, 3.0);
  EXPECT_EQ(by_key["M"].count, 2u);
  EXPECT_DOUBLE_EQ(r.overall_mae, 5.0 / 3.0);
  EXPECT_EQ(*by_key["M"].std, 0.0);
}

TEST(GroupReport, SingleGroupMatchesOverall) {
  const auto p = random_predictions(200, 1);
  std::vector<Prediction> same = p;
  for (auto& x : same) x.gender = "M";
  const BiasReport r = group_report(same, Grouping::kGender);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(*r.rows[0].mae, r.overall_mae);
  EXPECT_EQ(r.rows[0].count, 200u);
}

TEST(GroupReport, AggregationIdentitiesOnEveryGrouping) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = random_predictions(50 + 37 * seed, seed);
    double brute = 0.0;
    for (const auto& x : p) brute += std::fabs(x.predicted_age - x.true_age);
    brute /= static_cast<double>(p.size());
    for (Grouping g : {Grouping::kAgeRange, Grouping::kGender, Grouping::kEthnicity,
                       Grouping::kGenderEthnicity}) {
      const BiasReport r = group_report(p, g);
      std::size_t count = 0;
      double weighted = 0.0;
      for (const auto& row : r.rows) {
        count += row.count;
        if (row.mae) weighted += static_cast<double>(row.count) * *row.mae;
      }
      EXPECT_EQ(count, p.size());
      EXPECT_NEAR(weighted / static_cast<double>(p.size()), r.overall_mae, 1e-9);
      EXPECT_NEAR(r.overall_mae, brute, 1e-12);
    }
  }
}

TEST(GroupReport, AgeRangesUseTrueAgeHalfOpen) {
  // True 19.99 belongs to 15-20 even though the prediction is 26; 20 opens 20-25.
  const std::vector<Prediction> p{pred(15.0, 15.5), pred(19.99, 26.0), pred(20.0, 20.0),
                                  pred(31.0, 30.0)};
  const BiasReport r = group_report(p, Grouping::kAgeRange);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[0].key, "15-20");
  EXPECT_EQ(r.rows[0].count, 2u);
  EXPECT_EQ(r.rows[1].key, "20-25");
  EXPECT_EQ(r.rows[1].count, 1u);
  EXPECT_EQ(r.rows[2].key, "25-30");
  EXPECT_EQ(r.rows[2].count, 0u);
  EXPECT_FALSE(r.rows[2].mae.has_value());
  EXPECT_EQ(r.rows[3].key, "30-35");
}

TEST(GroupReport, AnchorAndWidth) {
  const std::vector<Prediction> p{pred(17.0, 18.0), pred(26.0, 24.0)};
  BiasOptions o;
  o.age_bin_width = 10.0;
  o.age_anchor = 16.0;
  const BiasReport r = group_report(p, Grouping::kAgeRange, o);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].key, "16-26");
  EXPECT_EQ(r.rows[1].key, "26-36");
  o.age_anchor = 20.0;
  EXPECT_THROW(group_report(p, Grouping::kAgeRange, o), ContractError);
  o.age_bin_width = 0.0;
  EXPECT_THROW(group_report(p, Grouping::kAgeRange, o), ContractError);
}

TEST(GroupReport, EmptyCellsAreListed) {
  const std::vector<Prediction> p{pred(30, 31, "M", "Black"), pred(40, 41, "F", "White")};
  BiasOptions o;
  o.genders = {"M", "F"};
  o.ethnicities = {"Black", "White", "Asian"};
  const BiasReport r = group_report(p, Grouping::kGenderEthnicity, o);
  ASSERT_EQ(r.rows.size(), 6u);
  std::size_t empty = 0;
  for (const auto& row : r.rows) {
    if (row.count == 0) {
      ++empty;
      EXPECT_FALSE(row.mae.has_value());
    }
  }
  EXPECT_EQ(empty, 4u);
  std::ostringstream csv;
  write_report_csv(r, csv);
  EXPECT_NE(csv.str().find("F/Asian,0,,\n"), std::string::npos) << csv.str();
}

TEST(GroupReport, SampleStdChangesOnlyStd) {
  const auto p = random_predictions(300, 5);
  BiasOptions pop, sample;
  sample.sample_std = true;
  const BiasReport a = group_report(p, Grouping::kEthnicity, pop);
  const BiasReport b = group_report(p, Grouping::kEthnicity, sample);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  EXPECT_EQ(a.overall_mae, b.overall_mae);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mae, b.rows[i].mae);
    if (a.rows[i].count > 1) {
      const double n = static_cast<double>(a.rows[i].count);
      EXPECT_NEAR(*b.rows[i].std, *a.rows[i].std * std::sqrt(n / (n - 1.0)), 1e-12);
    }
  }
}

TEST(GroupReport, PopulationStdOracle) {
  const std::vector<Prediction> p{pred(20, 21), pred(20, 23), pred(20, 14)};
  const BiasReport r = group_report(p, Grouping::kGender);
  // |e| = 1, 3, 6: mean 10/3.
  const double m = 10.0 / 3.0;
  const double var = ((1 - m) * (1 - m) + (3 - m) * (3 - m) + (6 - m) * (6 - m)) / 3.0;
  EXPECT_NEAR(*r.rows[0].std, std::sqrt(var), 1e-12);
}

TEST(GroupReport, Deterministic) {
  const auto p = random_predictions(120, 9);
  std::ostringstream a, b;
  write_report_csv(group_report(p, Grouping::kGenderEthnicity), a);
  write_report_csv(group_report(p, Grouping::kGenderEthnicity), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(GroupReport, UnknownGroupingAndEmptyInput) {
  EXPECT_THROW(parse_grouping("height"), ContractError);
  EXPECT_EQ(parse_grouping("gender-ethnicity"), Grouping::kGenderEthnicity);
  EXPECT_EQ(to_string(parse_grouping("age-range")), "age-range");
  EXPECT_THROW(group_report({}, Grouping::kGender), ContractError);
}

TEST(ReportOutput, TableColumns) {
  const std::vector<Prediction> p{pred(16, 17), pred(18, 15), pred(22, 22.5)};
  const BiasReport r = group_report(p, Grouping::kAgeRange);
  std::ostringstream text, csv;
  write_report_text(r, text);
  write_report_csv(r, csv);
  std::istringstream lines(text.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header.rfind("Age (true)", 0), 0u);
  EXPECT_NE(header.find("Samples"), std::string::npos);
  EXPECT_NE(header.find("MAE"), std::string::npos);
  EXPECT_NE(header.find("Std"), std::string::npos);
  EXPECT_EQ(first.rfind("15-20", 0), 0u);
  EXPECT_NE(first.find("2.00"), std::string::npos);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "group,count,mae,std");
  EXPECT_NE(csv.str().find("\noverall,3,"), std::string::npos);
}

TEST(Histogram, AllPerfect) {
  const std::vector<Prediction> p{pred(20, 20), pred(30, 30), pred(50, 50)};
  const ErrorHistogram h = error_histogram(p, 1.0);
  ASSERT_EQ(h.bins.size(), 1u);
  EXPECT_EQ(h.bins[0].center, 0.0);
  EXPECT_EQ(h.bins[0].fraction, 1.0);
  for (const auto& [t, f] : h.cumulative) EXPECT_EQ(f, 1.0);
}

TEST(Histogram, SymmetricPair) {
  const std::vector<Prediction> p{pred(20, 19), pred(20, 21)};
  const ErrorHistogram h = error_histogram(p, 1.0);
  ASSERT_EQ(h.bins.size(), 3u);
  EXPECT_EQ(h.bins[0].center, -1.0);
  EXPECT_EQ(h.bins[0].count, 1u);
  EXPECT_EQ(h.bins[1].count, 0u);
  EXPECT_EQ(h.bins[2].center, 1.0);
  EXPECT_EQ(h.bins[2].count, 1u);
}

TEST(Histogram, CountsSumAndSymmetricRange) {
  const auto p = random_predictions(500, 3);
  const ErrorHistogram h = error_histogram(p, 0.5);
  std::size_t total = 0;
  double frac = 0.0;
  for (const auto& b : h.bins) {
    total += b.count;
    frac += b.fraction;
  }
  EXPECT_EQ(total, p.size());
  EXPECT_NEAR(frac, 1.0, 1e-12);
  EXPECT_EQ(h.bins.front().center, -h.bins.back().center);
  EXPECT_THROW(error_histogram(p, 0.0), ContractError);
}

TEST(Histogram, CumulativeMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_predictions(333, seed);
    const ErrorHistogram h = error_histogram(p, 1.0);
    ASSERT_EQ(h.cumulative.size(), 4u);
    const double thresholds[] = {1.0, 2.0, 3.0, 5.0};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto within = std::count_if(p.begin(), p.end(), [&](const Prediction& x) {
        return std::fabs(x.predicted_age - x.true_age) <= thresholds[i];
      });
      EXPECT_EQ(h.cumulative[i].first, thresholds[i]);
      EXPECT_NEAR(h.cumulative[i].second, static_cast<double>(within) / 333.0, 1e-12);
    }
  }
}

TEST(Histogram, CsvHeaders) {
  const ErrorHistogram h = error_histogram({pred(20, 21)}, 1.0);
  std::ostringstream a, b;
  write_histogram_csv(h, a);
  write_cumulative_csv(h, b);
  EXPECT_EQ(a.str(), "bin_center,count,fraction\n-1,0,0\n0,0,0\n1,1,1\n");
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "threshold,fraction_within");
}

// With no group offsets and balanced groups, the largest inter-group MAE gap
// on a fixed held-out set shrinks as training data grows. Uses the
// no-encoder model so three sizes times three seeds stay fast.
TEST(BiasTrend, GroupGapShrinksWithData) {
  std::vector<double> medians;
  for (std::size_t n : {1000u, 4000u, 16000u}) {
    std::vector<double> gaps;
    for (std::uint64_t s = 0; s < 3; ++s) {
      RunConfig c;
      c.data.group_shift = 0.0;
      c.data.gender = {{"F", "M"}, {0.5, 0.5}};
      c.data.ethnicity = {{"A", "B", "C", "D"}, {0.25, 0.25, 0.25, 0.25}};
      c.data.n_subjects = n / c.data.samples_per_subject;
      c.data.seed = s;
      c.train.model.aggregation = Aggregation::kNone;
      c.train.model.encoder.num_views = 1;
      c.train.optimizer.epochs = 10;
      c.train.seed = s;
      SyntheticConfig held_out = c.data;
      held_out.n_subjects = 400;
      held_out.seed = 1000 + s;
      const TrainResult r = train(generate_dataset(c.data), nullptr, c.train);
      const EvalResult ev = evaluate(r.model, generate_dataset(held_out), eval_options(c.train));
      const BiasReport rep = group_report(ev.predictions, Grouping::kEthnicity);
      double lo = 1e300, hi = 0.0;
      for (const auto& row : rep.rows) {
        lo = std::min(lo, *row.mae);
        hi = std::max(hi, *row.mae);
      }
      gaps.push_back(hi - lo);
    }
    std::sort(gaps.begin(), gaps.end());
    medians.push_back(gaps[1]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}
