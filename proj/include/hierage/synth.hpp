#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hierage/tensor.hpp"

namespace hierage {

// One labeled sample. Demographic tags are per subject.
struct SubjectRecord {
  std::int64_t sample_id = 0;
  std::int64_t subject_id = 0;
  double age = 0.0;
  std::string gender;
  std::string ethnicity;
  std::vector<double> features;

  bool operator==(const SubjectRecord&) const = default;
};

struct Dataset {
  std::size_t feature_dim = 0;
  std::vector<SubjectRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool operator==(const Dataset&) const = default;
};

// Categorical axis with sampling proportions (must sum to one).
struct GroupProportions {
  std::vector<std::string> names;
  std::vector<double> proportions;

  void validate(const char* axis) const;
  // Largest-remainder allocation of `total` items; each count is within one
  // of proportion * total.
  std::vector<std::size_t> allocate(std::size_t total) const;
};

// Gender and ethnicity mixes of the MORPH II breakdown.
GroupProportions morph_gender_mix();
GroupProportions morph_ethnicity_mix();

struct SyntheticConfig {
  std::size_t n_subjects = 1000;
  std::size_t samples_per_subject = 5;
  std::size_t feature_dim = 16;
  std::size_t age_signal_dims = 8;
  double noise_sigma = 0.05;    // per-sample observation noise
  double subject_sigma = 0.05;  // per-subject identity offset on the non-signal coordinates
  double group_shift = 0.05;    // magnitude of each non-reference group's offset
  double min_age = 16.0;
  double max_age = 77.0;
  double age_span = 5.0;  // longitudinal spread of one subject's ages
  GroupProportions gender = morph_gender_mix();
  GroupProportions ethnicity = morph_ethnicity_mix();
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic per-item seed derived from a run seed (splitmix64 finalizer
// over seed and id).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id);

// The noiseless age signal g(age): a linear ramp in coordinate 0 and
// sinusoids of distinct frequencies in coordinates 1..dims-1.
std::vector<double> age_signal(double age, const SyntheticConfig& config);

// Rounds to the nine significant digits the dataset file stores.
double canonical_value(double value);

// Sample ids are 0..N-1 grouped by subject; every value is canonical so the
// dataset survives a file round trip bit-exactly.
Dataset generate_dataset(const SyntheticConfig& config);

// Feature-space stand-ins for the image augmentations, each applied
// independently with its own probability.
struct AugmentationSpec {
  double noise_probability = 0.5;
  double noise_sigma = 0.1;
  double mask_probability = 0.5;
  double mask_fraction = 0.125;  // share of coordinates zeroed (erasing analog)
  double scale_probability = 0.5;
  double scale_min = 0.9;  // global scaling (affine analog)
  double scale_max = 1.1;
  double swap_probability = 0.5;  // random coordinate-pair swap (flip analog)
  bool include_original = true;   // row 0 is the untouched input

  void validate() const;
  static AugmentationSpec none();
};

// K augmented copies of `features` as a [K, F] tensor.
Tensor augment(std::span<const double> features, std::size_t k, const AugmentationSpec& spec,
               std::uint64_t seed);

enum class SplitKind { kRandom, kSubjectExclusive };

struct SplitProtocol {
  SplitKind kind = SplitKind::kSubjectExclusive;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

// RS splits samples, SE splits subjects. Both keep the input order inside
// each part.
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitProtocol& protocol);

SplitKind parse_split_kind(const std::string& name);
std::string to_string(SplitKind kind);

// CSV: sample_id,subject_id,age,gender,ethnicity,f0..f{F-1}; floats printed
// with nine significant digits, LF line endings.
void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(std::istream& in, const std::string& source = "<stream>");
Dataset read_dataset(const std::filesystem::path& path);

std::string format_float(double value);

}  // namespace hierage
