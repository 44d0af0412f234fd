#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glada/common.hpp"
#include "glada/label_state.hpp"

namespace glada::dataio {

// Windowed multivariate series X[p][m][n] with optional labels (-1 = unlabeled).
struct TimeSeriesDataset {
  Tensor3 samples;
  std::vector<int> labels;  // empty when the dataset carries no labels
  int num_classes = 2;

  std::size_t size() const { return samples.d0; }
  std::size_t channels() const { return samples.d1; }
  std::size_t length() const { return samples.d2; }
  bool has_labels() const { return !labels.empty(); }
  bool fully_labeled() const;

  // Throws FormatError/ArgumentError when an invariant fails.
  void validate() const;

  TimeSeriesDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const TimeSeriesDataset&) const = default;
};

// Shortest series surviving three stride-2 poolings.
inline constexpr std::size_t kMinLength = 8;

TimeSeriesDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const TimeSeriesDataset& ds, const std::filesystem::path& dir);

struct SplitPair {
  TimeSeriesDataset train;
  TimeSeriesDataset test;
  std::vector<std::size_t> train_indices;  // positions in the original dataset
  std::vector<std::size_t> test_indices;
};

// |train| = round(ratio * p); shuffle depends only on seed.
SplitPair split_train_test(const TimeSeriesDataset& ds, double ratio, std::uint64_t seed);

// Keeps max(1, round(fraction * n_c)) labels of every class c as `given`.
PseudoLabelState stratified_label_mask(const TimeSeriesDataset& ds, double fraction,
                                       std::uint64_t seed);

struct SynthSpec {
  int num_classes = 6;
  std::size_t samples_per_class = 100;
  std::size_t channels = 3;
  std::size_t length = 64;
  // Target-domain shift.
  double amplitude_scale = 1.0;  // multiplies every target signal
  double phase_offset = 0.0;     // radians added to channel c's phase, times (c + 1)
  double frequency_scale = 1.0;  // multiplies every target frequency
  double offset = 0.0;           // constant added to channel c, times (c + 1)
  double random_offset = 0.0;    // per-sample, per-channel uniform offset half-width
  // Additive Gaussian noise, both domains.
  double noise_std = 0.0;
  // Per-sample nuisance variation, identical in distribution across domains.
  double phase_jitter = 0.5;      // uniform half-width, radians
  double amplitude_jitter = 0.1;  // uniform relative half-width
  std::uint64_t seed = 0;
  // Nuisance stream for the target domain; unset draws an independent stream.
  // Setting it equal to seed makes the target a sample-wise transform of the source.
  std::optional<std::uint64_t> target_seed;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

// Class k, channel c is a sinusoid whose frequency grows with k and c. The
// target applies the shift fields above. Both
// domains are fully labeled and ordered class by class.
std::pair<TimeSeriesDataset, TimeSeriesDataset> make_synthetic_pair(const SynthSpec& spec);

struct Batch {
  Tensor3 samples;                  // [b][m][n]
  std::vector<int> labels;          // empty if the source has no labels
  std::vector<std::size_t> indices; // positions in the iterated index set
};

// Shuffled index batches for one epoch; keyed by (seed, epoch). Last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch);

Batch gather(const TimeSeriesDataset& ds, std::span<const std::size_t> indices);

// One epoch of materialized batches over ds.
std::vector<Batch> batch_iter(const TimeSeriesDataset& ds, std::size_t batch_size,
                              std::uint64_t seed, std::uint64_t epoch);

}  // namespace glada::dataio
