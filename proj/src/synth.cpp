#include "hierage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "hierage/errors.hpp"

namespace hierage {

namespace {

// Salts separating the random streams derived from one run seed.
constexpr std::uint64_t kSubjectStream = 0x5ab1ec7ULL;
constexpr std::uint64_t kSampleStream = 0x5a3b1eULL;
constexpr std::uint64_t kGroupStream = 0x6e0c0ULL;

// Deterministic direction for non-reference group `g` of axis `axis`,
// normalized to unit length over the signal coordinates.
std::vector<double> group_direction(std::size_t axis, std::size_t g, std::size_t dims) {
  std::vector<double> dir(dims, 0.0);
  if (g == 0 || dims == 0) return dir;
  double norm = 0.0;
  for (std::size_t j = 0; j < dims; ++j) {
    dir[j] = std::sin(1.7 * static_cast<double>(g + 1) * static_cast<double>(j + 1) +
                      0.9 * static_cast<double>(axis));
    norm += dir[j] * dir[j];
  }
  norm = std::sqrt(norm);
  for (double& v : dir) v /= norm;
  return dir;
}

}  // namespace

void GroupProportions::validate(const char* axis) const {
  if (names.empty() || names.size() != proportions.size()) {
    throw ContractError(std::string(axis) + ": need one proportion per group name");
  }
  double total = 0.0;
  for (double p : proportions) {
    if (!std::isfinite(p) || p < 0.0) throw ContractError(std::string(axis) + ": negative proportion");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ContractError(std::string(axis) + ": proportions sum to " + format_float(total) + ", not 1");
  }
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) throw ContractError(std::string(axis) + ": duplicate group name");
  for (const std::string& n : names) csv::check_tag(n, axis);
}

std::vector<std::size_t> GroupProportions::allocate(std::size_t total) const {
  const std::size_t g = proportions.size();
  std::vector<std::size_t> counts(g);
  std::vector<std::pair<double, std::size_t>> remainders(g);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const double exact = proportions[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = {exact - static_cast<double>(counts[i]), i};
    assigned += counts[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i % g].second];
  return counts;
}

GroupProportions morph_gender_mix() {
  const double male = 46645.0, female = 8489.0, total = male + female;
  return {{"M", "F"}, {male / total, female / total}};
}

GroupProportions morph_ethnicity_mix() {
  const std::vector<double> counts{42589.0, 10559.0, 154.0, 1769.0, 63.0};
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> p;
  for (double c : counts) p.push_back(c / total);
  return {{"Black", "White", "Asian", "Hispanic", "Other"}, p};
}

void SyntheticConfig::validate() const {
  if (n_subjects == 0 || samples_per_subject == 0) {
    throw ContractError("synthetic: n_subjects and samples_per_subject must be positive");
  }
  if (feature_dim == 0 || age_signal_dims == 0 || age_signal_dims > feature_dim) {
    throw ContractError("synthetic: need 0 < age_signal_dims <= feature_dim");
  }
  for (double s : {noise_sigma, subject_sigma, group_shift, age_span}) {
    if (!std::isfinite(s) || s < 0.0) throw ContractError("synthetic: scales must be finite and >= 0");
  }
  if (!(max_age > min_age) || max_age - min_age < age_span) {
    throw ContractError("synthetic: age range must exceed the longitudinal span");
  }
  gender.validate("gender");
  ethnicity.validate("ethnicity");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> age_signal(double age, const SyntheticConfig& config) {
  const double t = (age - config.min_age) / (config.max_age - config.min_age);
  std::vector<double> g(config.age_signal_dims);
  g[0] = 2.0 * t - 1.0;
  for (std::size_t j = 1; j < g.size(); ++j) {
    const double freq = std::numbers::pi * (1.0 + 0.5 * static_cast<double>(j));
    g[j] = std::sin(freq * t + 0.3 * static_cast<double>(j));
  }
  return g;
}

std::string format_float(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

double canonical_value(double value) { return std::strtod(format_float(value).c_str(), nullptr); }

Dataset generate_dataset(const SyntheticConfig& config) {
  config.validate();
  const std::size_t f = config.feature_dim, dims = config.age_signal_dims;

  // Demographic tags per subject: exact largest-remainder counts, shuffled.
  std::mt19937_64 group_rng(mix_seed(config.seed, kGroupStream));
  auto tags = [&](const GroupProportions& axis) {
    std::vector<std::size_t> out;
    const auto counts = axis.allocate(config.n_subjects);
    for (std::size_t g = 0; g < counts.size(); ++g) out.insert(out.end(), counts[g], g);
    std::shuffle(out.begin(), out.end(), group_rng);
    return out;
  };
  const std::vector<std::size_t> gender = tags(config.gender);
  const std::vector<std::size_t> ethnicity = tags(config.ethnicity);

  std::vector<std::vector<double>> gender_shift, ethnicity_shift;
  for (std::size_t g = 0; g < config.gender.names.size(); ++g)
    gender_shift.push_back(group_direction(0, g, dims));
  for (std::size_t g = 0; g < config.ethnicity.names.size(); ++g)
    ethnicity_shift.push_back(group_direction(1, g, dims));

  const auto lowest = static_cast<long>(std::ceil(config.min_age));
  const auto highest_base = static_cast<long>(std::floor(config.max_age - config.age_span));
  const auto span = static_cast<long>(std::floor(config.age_span));

  Dataset data;
  data.feature_dim = f;
  data.records.reserve(config.n_subjects * config.samples_per_subject);
  for (std::size_t s = 0; s < config.n_subjects; ++s) {
    std::mt19937_64 subject_rng(mix_seed(config.seed ^ kSubjectStream, s));
    const long base = std::uniform_int_distribution<long>(lowest, highest_base)(subject_rng);
    std::normal_distribution<double> identity(0.0, 1.0);
    std::vector<double> offset(f);
    for (double& v : offset) v = config.subject_sigma * identity(subject_rng);
    std::vector<double> ages(config.samples_per_subject);
    for (double& a : ages) {
      a = static_cast<double>(base + std::uniform_int_distribution<long>(0, span)(subject_rng));
    }
    std::sort(ages.begin(), ages.end());

    for (double age : ages) {
      SubjectRecord r;
      r.sample_id = static_cast<std::int64_t>(data.records.size());
      r.subject_id = static_cast<std::int64_t>(s);
      r.age = canonical_value(age);
      r.gender = config.gender.names[gender[s]];
      r.ethnicity = config.ethnicity.names[ethnicity[s]];
      std::mt19937_64 sample_rng(mix_seed(config.seed ^ kSampleStream,
                                          static_cast<std::uint64_t>(r.sample_id)));
      std::normal_distribution<double> noise(0.0, 1.0);
      const std::vector<double> signal = age_signal(age, config);
      r.features.resize(f);
      for (std::size_t j = 0; j < f; ++j) {
        double v = config.noise_sigma * noise(sample_rng);
        if (j >= dims) {
          v += offset[j];
        } else {
          v += signal[j] + config.group_shift * (gender_shift[gender[s]][j] +
                                                 ethnicity_shift[ethnicity[s]][j]);
        }
        r.features[j] = canonical_value(v);
      }
      data.records.push_back(std::move(r));
    }
  }
  return data;
}

void AugmentationSpec::validate() const {
  for (double p : {noise_probability, mask_probability, scale_probability, swap_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("augmentation: probabilities must lie in [0, 1]");
  }
  if (!(mask_fraction >= 0.0 && mask_fraction < 1.0)) {
    throw ContractError("augmentation: mask fraction must lie in [0, 1)");
  }
  if (!(noise_sigma >= 0.0) || !(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw ContractError("augmentation: invalid noise or scale range");
  }
}

AugmentationSpec AugmentationSpec::none() {
  AugmentationSpec s;
  s.noise_probability = s.mask_probability = s.scale_probability = s.swap_probability = 0.0;
  return s;
}

Tensor augment(std::span<const double> features, std::size_t k, const AugmentationSpec& spec,
               std::uint64_t seed) {
  spec.validate();
  if (k == 0) throw ContractError("augment: K must be at least 1");
  const std::size_t f = features.size();
  if (f == 0) throw ShapeError("augment: empty feature vector");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution noise_on(spec.noise_probability), mask_on(spec.mask_probability),
      scale_on(spec.scale_probability), swap_on(spec.swap_probability);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  std::uniform_real_distribution<double> scale(spec.scale_min, spec.scale_max);
  const auto masked = static_cast<std::size_t>(std::floor(spec.mask_fraction * static_cast<double>(f)));

  std::vector<double> out(k * f);
  std::vector<std::size_t> order(f);
  for (std::size_t row = 0; row < k; ++row) {
    double* v = out.data() + row * f;
    std::copy(features.begin(), features.end(), v);
    if (row == 0 && spec.include_original) continue;
    // Draw every decision so each row consumes the stream identically.
    const bool do_scale = scale_on(rng), do_swap = swap_on(rng), do_noise = noise_on(rng),
               do_mask = mask_on(rng);
    if (do_scale) {
      const double s = scale(rng);
      for (std::size_t j = 0; j < f; ++j) v[j] *= s;
    }
    if (do_swap && f >= 2) {
      const std::size_t a = std::uniform_int_distribution<std::size_t>(0, f - 1)(rng);
      std::size_t b = std::uniform_int_distribution<std::size_t>(0, f - 2)(rng);
      if (b >= a) ++b;
      std::swap(v[a], v[b]);
    }
    if (do_noise) {
      for (std::size_t j = 0; j < f; ++j) v[j] += noise(rng);
    }
    if (do_mask && masked > 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t j = 0; j < masked; ++j) v[order[j]] = 0.0;
    }
  }
  return Tensor::matrix(k, f, std::move(out));
}

SplitKind parse_split_kind(const std::string& name) {
  if (name == "RS" || name == "rs" || name == "random") return SplitKind::kRandom;
  if (name == "SE" || name == "se" || name == "subject") return SplitKind::kSubjectExclusive;
  throw ContractError("unknown split protocol '" + name + "' (expected RS or SE)");
}

std::string to_string(SplitKind kind) { return kind == SplitKind::kRandom ? "RS" : "SE"; }

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitProtocol& protocol) {
  if (!(protocol.train_fraction > 0.0 && protocol.train_fraction < 1.0)) {
    throw ContractError("split: train_fraction must lie in (0, 1)");
  }
  if (dataset.empty()) throw ContractError("split: dataset is empty");
  std::mt19937_64 rng(protocol.seed);
  std::vector<bool> in_train(dataset.size(), false);

  if (protocol.kind == SplitKind::kRandom) {
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(protocol.train_fraction * static_cast<double>(dataset.size())));
    for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
  } else {
    std::vector<std::int64_t> subjects;
    std::set<std::int64_t> seen;
    for (const SubjectRecord& r : dataset.records) {
      if (seen.insert(r.subject_id).second) subjects.push_back(r.subject_id);
    }
    std::sort(subjects.begin(), subjects.end());
    std::shuffle(subjects.begin(), subjects.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(protocol.train_fraction * static_cast<double>(subjects.size())));
    const std::set<std::int64_t> train_subjects(subjects.begin(),
                                                subjects.begin() + static_cast<std::ptrdiff_t>(n_train));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      in_train[i] = train_subjects.count(dataset.records[i].subject_id) > 0;
    }
  }

  std::pair<Dataset, Dataset> parts;
  parts.first.feature_dim = parts.second.feature_dim = dataset.feature_dim;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_train[i] ? parts.first : parts.second).records.push_back(dataset.records[i]);
  }
  return parts;
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  out << "sample_id,subject_id,age,gender,ethnicity";
  for (std::size_t j = 0; j < dataset.feature_dim; ++j) out << ",f" << j;
  out << '\n';
  for (const SubjectRecord& r : dataset.records) {
    if (r.features.size() != dataset.feature_dim) {
      throw ShapeError("write_dataset: sample " + std::to_string(r.sample_id) + " has " +
                       std::to_string(r.features.size()) + " features, expected " +
                       std::to_string(dataset.feature_dim));
    }
    csv::check_tag(r.gender, "gender");
    csv::check_tag(r.ethnicity, "ethnicity");
    out << r.sample_id << ',' << r.subject_id << ',' << format_float(r.age) << ',' << r.gender
        << ',' << r.ethnicity;
    for (double v : r.features) out << ',' << format_float(v);
    out << '\n';
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(dataset, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  const auto header = csv::split(csv::strip_cr(line));
  const char* fixed[] = {"sample_id", "subject_id", "age", "gender", "ethnicity"};
  if (header.size() < 5) throw ParseError(source, 1, "header has too few columns");
  for (std::size_t i = 0; i < 5; ++i) {
    if (header[i] != fixed[i]) {
      throw ParseError(source, 1, std::string("expected column '") + fixed[i] + "', found '" +
                                      std::string(header[i]) + "'");
    }
  }
  Dataset data;
  data.feature_dim = header.size() - 5;
  for (std::size_t j = 0; j < data.feature_dim; ++j) {
    if (header[5 + j] != "f" + std::to_string(j)) {
      throw ParseError(source, 1, "feature columns must be named f0..f{F-1}");
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = csv::strip_cr(line);
    if (text.empty()) continue;
    const auto fields = csv::split(text);
    if (fields.size() != header.size()) {
      throw ParseError(source, line_no, "expected " + std::to_string(header.size()) +
                                            " fields, found " + std::to_string(fields.size()));
    }
    SubjectRecord r;
    r.sample_id = csv::parse_int(fields[0], source, line_no, "sample_id");
    r.subject_id = csv::parse_int(fields[1], source, line_no, "subject_id");
    r.age = csv::parse_double(fields[2], source, line_no, "age");
    r.gender = std::string(fields[3]);
    r.ethnicity = std::string(fields[4]);
    r.features.reserve(data.feature_dim);
    for (std::size_t j = 0; j < data.feature_dim; ++j) {
      r.features.push_back(csv::parse_double(fields[5 + j], source, line_no, "feature"));
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in, path.string());
}

}  // namespace hierage
