#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "hierage/errors.hpp"
#include "hierage/synth.hpp"

using namespace hierage;

namespace {

SyntheticConfig small(std::uint64_t seed = 0) {
  SyntheticConfig c;
  c.n_subjects = 100;
  c.samples_per_subject = 5;
  c.seed = seed;
  return c;
}

std::set<std::int64_t> subjects(const Dataset& d) {
  std::set<std::int64_t> s;
  for (const auto& r : d.records) s.insert(r.subject_id);
  return s;
}

}  // namespace

TEST(Generate, CountsAndSubjectCardinality) {
  const Dataset d = generate_dataset(small());
  EXPECT_EQ(d.size(), 500u);
  std::map<std::int64_t, std::size_t> per_subject;
  for (const auto& r : d.records) ++per_subject[r.subject_id];
  EXPECT_EQ(per_subject.size(), 100u);
  for (const auto& [s, n] : per_subject) EXPECT_EQ(n, 5u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.records[i].sample_id, static_cast<std::int64_t>(i));
}

TEST(Generate, DeterministicInSeed) {
  const Dataset a = generate_dataset(small(3));
  EXPECT_EQ(a, generate_dataset(small(3)));
  EXPECT_NE(a, generate_dataset(small(4)));
  std::ostringstream x, y;
  write_dataset(a, x);
  write_dataset(generate_dataset(small(3)), y);
  EXPECT_EQ(x.str(), y.str());
}

TEST(Generate, NoiselessSignalDependsOnlyOnAge) {
  SyntheticConfig c = small(5);
  c.noise_sigma = 0.0;
  c.group_shift = 0.0;
  const Dataset d = generate_dataset(c);
  std::map<double, std::vector<double>> seen;
  std::size_t pairs = 0;
  for (const auto& r : d.records) {
    const std::vector<double> sig(r.features.begin(), r.features.begin() + c.age_signal_dims);
    auto [it, fresh] = seen.emplace(r.age, sig);
    if (!fresh) {
      EXPECT_EQ(it->second, sig);
      ++pairs;
    }
  }
  EXPECT_GT(pairs, 0u);
}

TEST(Generate, AgeSignalIsInjective) {
  const SyntheticConfig c;
  const auto a = age_signal(30.0, c);
  const auto b = age_signal(31.0, c);
  EXPECT_NE(a, b);
  EXPECT_LT(age_signal(16.0, c)[0], age_signal(77.0, c)[0]);
}

TEST(Generate, GroupCountsFollowProportions) {
  SyntheticConfig c;
  c.n_subjects = 1000;
  c.samples_per_subject = 1;
  const Dataset d = generate_dataset(c);
  std::map<std::string, std::size_t> gender, ethnicity;
  for (const auto& r : d.records) {
    ++gender[r.gender];
    ++ethnicity[r.ethnicity];
  }
  for (std::size_t g = 0; g < c.gender.names.size(); ++g) {
    EXPECT_LE(std::abs(static_cast<double>(gender[c.gender.names[g]]) - 1000.0 * c.gender.proportions[g]), 1.0);
  }
  for (std::size_t e = 0; e < c.ethnicity.names.size(); ++e) {
    EXPECT_LE(std::abs(static_cast<double>(ethnicity[c.ethnicity.names[e]]) -
                       1000.0 * c.ethnicity.proportions[e]),
              1.0);
  }
}

TEST(Generate, SubjectsHaveConsistentTagsAndAgesCoverRange) {
  SyntheticConfig c;
  c.n_subjects = 2000;
  const Dataset d = generate_dataset(c);
  std::map<std::int64_t, std::pair<std::string, std::string>> tags;
  double lo = 1e9, hi = -1e9;
  for (const auto& r : d.records) {
    auto [it, fresh] = tags.emplace(r.subject_id, std::make_pair(r.gender, r.ethnicity));
    if (!fresh) EXPECT_EQ(it->second, std::make_pair(r.gender, r.ethnicity));
    lo = std::min(lo, r.age);
    hi = std::max(hi, r.age);
    EXPECT_GE(r.age, c.min_age);
    EXPECT_LE(r.age, c.max_age);
  }
  EXPECT_EQ(lo, c.min_age);
  EXPECT_EQ(hi, c.max_age);
}

TEST(Generate, InvalidProportionsRejected) {
  SyntheticConfig c = small();
  c.gender.proportions = {0.5, 0.6};
  EXPECT_THROW(generate_dataset(c), ContractError);
}

TEST(DatasetFile, RoundTripsBitExactly) {
  const Dataset d = generate_dataset(small(9));
  std::stringstream s;
  write_dataset(d, s);
  EXPECT_EQ(read_dataset(s), d);

  Dataset empty;
  empty.feature_dim = 4;
  std::stringstream e;
  write_dataset(empty, e);
  const std::string text = e.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_EQ(read_dataset(e), empty);
}

TEST(DatasetFile, NonNumericAgeNamesTheLine) {
  std::stringstream s;
  s << "sample_id,subject_id,age,gender,ethnicity,f0,f1\n"
    << "0,0,31,M,Black,0.1,0.2\n"
    << "1,0,abc,M,Black,0.1,0.2\n";
  try {
    read_dataset(s, "data.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("data.csv:3"), std::string::npos) << e.what();
  }
}

TEST(Augment, NoOpSpecCopiesInput) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
  AugmentationSpec spec = AugmentationSpec::none();
  spec.include_original = false;
  const Tensor v = augment(x, 4, spec, 1);
  EXPECT_EQ(v.shape(), (Shape{4, 8}));
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(v.at(k, j), x[j]);
}

TEST(Augment, ForcedMaskZeroesHalf) {
  std::vector<double> x(16);
  for (std::size_t j = 0; j < 16; ++j) x[j] = 1.0 + static_cast<double>(j);
  AugmentationSpec spec = AugmentationSpec::none();
  spec.mask_probability = 1.0;
  spec.mask_fraction = 0.5;
  spec.include_original = false;
  const Tensor v = augment(x, 6, spec, 2);
  for (std::size_t k = 0; k < 6; ++k) {
    std::size_t zeros = 0;
    for (std::size_t j = 0; j < 16; ++j) zeros += v.at(k, j) == 0.0;
    EXPECT_EQ(zeros, 8u);
  }
  // Odd width rounds down.
  const Tensor odd = augment(std::vector<double>(7, 1.0), 3, spec, 2);
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t zeros = 0;
    for (std::size_t j = 0; j < 7; ++j) zeros += odd.at(k, j) == 0.0;
    EXPECT_EQ(zeros, 3u);
  }
}

TEST(Augment, DeterministicFiniteAndKeepsOriginal) {
  std::vector<double> x(16);
  for (std::size_t j = 0; j < 16; ++j) x[j] = std::sin(static_cast<double>(j));
  const AugmentationSpec spec;
  const Tensor a = augment(x, 10, spec, 77);
  const Tensor b = augment(x, 10, spec, 77);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_TRUE(all_finite(a.values()));
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(a.at(0, j), x[j]);
  const Tensor c = augment(x, 10, spec, 78);
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  const Tensor one = augment(x, 1, spec, 5);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(one[j], x[j]);
}

TEST(Augment, SpecValidation) {
  AugmentationSpec spec;
  spec.mask_fraction = 1.0;
  EXPECT_THROW(spec.validate(), ContractError);
  spec = AugmentationSpec{};
  spec.noise_probability = 1.5;
  EXPECT_THROW(spec.validate(), ContractError);
  EXPECT_THROW(augment(std::vector<double>(4, 0.0), 0, AugmentationSpec{}, 1), ContractError);
}

TEST(Split, SubjectExclusiveSmallExample) {
  Dataset d;
  d.feature_dim = 1;
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 3; ++i) d.records.push_back({s * 3 + i, s, 20.0 + i, "M", "Black", {0.0}});
  const auto [train, test] = split(d, {SplitKind::kSubjectExclusive, 0.5, 1});
  EXPECT_EQ(train.size() + test.size(), 12u);
  const auto a = subjects(train), b = subjects(test);
  EXPECT_EQ(a.size(), 2u);
  for (auto s : a) EXPECT_FALSE(b.count(s));
}

TEST(Split, SubjectExclusiveOverManySeeds) {
  const Dataset d = generate_dataset(small(1));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto [train, test] = split(d, {SplitKind::kSubjectExclusive, 0.8, seed});
    EXPECT_EQ(train.size() + test.size(), d.size());
    const auto a = subjects(train), b = subjects(test);
    for (auto s : a) ASSERT_FALSE(b.count(s)) << "seed " << seed;
  }
}

TEST(Split, RandomIsExactPartition) {
  SyntheticConfig c = small(2);
  c.n_subjects = 200;
  const Dataset d = generate_dataset(c);
  ASSERT_EQ(d.size(), 1000u);
  const auto [train, test] = split(d, {SplitKind::kRandom, 0.8, 3});
  EXPECT_EQ(train.size(), 800u);
  EXPECT_EQ(test.size(), 200u);
  std::set<std::int64_t> ids;
  for (const auto* part : {&train, &test})
    for (const auto& r : part->records) EXPECT_TRUE(ids.insert(r.sample_id).second);
  EXPECT_EQ(ids.size(), 1000u);
}

TEST(Split, BadFractionAndEmptyDataset) {
  const Dataset d = generate_dataset(small());
  EXPECT_THROW(split(d, {SplitKind::kRandom, 1.0, 0}), ContractError);
  EXPECT_THROW(split(d, {SplitKind::kRandom, 0.0, 0}), ContractError);
  EXPECT_THROW(split(Dataset{}, {SplitKind::kRandom, 0.5, 0}), ContractError);
  EXPECT_EQ(parse_split_kind("RS"), SplitKind::kRandom);
  EXPECT_EQ(parse_split_kind("SE"), SplitKind::kSubjectExclusive);
  EXPECT_THROW(parse_split_kind("XX"), ContractError);
}

TEST(MixSeed, SpreadsNearbyInputs) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s)
    for (std::uint64_t id = 0; id < 50; ++id) seen.insert(mix_seed(s, id));
  EXPECT_EQ(seen.size(), 2500u);
}
