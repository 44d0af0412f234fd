#include "glada/dataio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

namespace glada::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

std::uintmax_t file_size_or_throw(const fs::path& p) {
  std::error_code ec;
  const auto n = fs::file_size(p, ec);
  if (ec) throw IoError("cannot stat " + p.string() + ": " + ec.message());
  return n;
}

template <typename T>
std::vector<T> read_binary(const fs::path& p, std::size_t count) {
  if (!fs::exists(p)) throw IoError("missing file " + p.string());
  const auto bytes = file_size_or_throw(p);
  if (bytes != count * sizeof(T))
    throw FormatError(p.filename().string() + " holds " + std::to_string(bytes) +
                      " bytes, meta.json implies " + std::to_string(count * sizeof(T)));
  std::vector<T> out(count);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read on " + p.string());
  for (auto& v : out) v = to_little(v);
  return out;
}

template <typename T>
void write_binary(const fs::path& p, std::vector<T> values) {
  for (auto& v : values) v = to_little(v);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) throw IoError("write failed on " + p.string());
}

std::size_t require_positive(const json& meta, const char* key) {
  if (!meta.contains(key) || !meta[key].is_number_integer())
    throw FormatError(std::string("meta.json: missing integer field '") + key + "'");
  const auto v = meta[key].get<long long>();
  if (v < 1) throw FormatError(std::string("meta.json: field '") + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

}  // namespace

bool TimeSeriesDataset::fully_labeled() const {
  return has_labels() && std::none_of(labels.begin(), labels.end(), [](int y) { return y < 0; });
}

void TimeSeriesDataset::validate() const {
  if (num_classes < 2) throw ArgumentError("num_classes must be at least 2");
  if (size() < 1 || channels() < 1) throw ShapeError("dataset needs p >= 1 and m >= 1");
  if (length() < kMinLength)
    throw ShapeError("series length " + std::to_string(length()) + " is below the minimum of " +
                     std::to_string(kMinLength));
  if (samples.data.size() != size() * channels() * length())
    throw ShapeError("sample buffer does not match its declared shape");
  if (!all_finite(samples.data)) throw NumericError("dataset samples contain NaN or Inf");
  if (has_labels()) {
    if (labels.size() != size()) throw ShapeError("label count differs from sample count");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < -1 || labels[i] >= num_classes)
        throw FormatError("label " + std::to_string(labels[i]) + " at sample " +
                          std::to_string(i) + " is outside [-1, " + std::to_string(num_classes) +
                          ")");
    }
  }
}

TimeSeriesDataset TimeSeriesDataset::subset(std::span<const std::size_t> indices) const {
  TimeSeriesDataset out;
  out.num_classes = num_classes;
  out.samples = Tensor3(indices.size(), channels(), length());
  const std::size_t stride = channels() * length();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw ArgumentError("subset index out of range");
    std::copy_n(samples.data.begin() + static_cast<std::ptrdiff_t>(indices[i] * stride), stride,
                out.samples.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  if (has_labels()) {
    out.labels.reserve(indices.size());
    for (auto idx : indices) out.labels.push_back(labels[idx]);
  }
  return out;
}

TimeSeriesDataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw IoError("missing file " + meta_path.string());
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("cannot open " + meta_path.string());
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw FormatError("meta.json: " + std::string(e.what()));
  }

  const std::size_t p = require_positive(meta, "p");
  const std::size_t m = require_positive(meta, "m");
  const std::size_t n = require_positive(meta, "n");
  const std::size_t k = require_positive(meta, "k");
  if (meta.value("dtype", std::string{}) != "f32le")
    throw FormatError("meta.json: dtype must be \"f32le\"");
  if (!meta.contains("has_labels") || !meta["has_labels"].is_boolean())
    throw FormatError("meta.json: missing boolean field 'has_labels'");

  TimeSeriesDataset ds;
  ds.num_classes = static_cast<int>(k);
  ds.samples = Tensor3(p, m, n);
  const auto raw = read_binary<float>(dir / "samples.bin", p * m * n);
  std::copy(raw.begin(), raw.end(), ds.samples.data.begin());

  if (meta["has_labels"].get<bool>()) {
    const auto labels = read_binary<std::int32_t>(dir / "labels.bin", p);
    ds.labels.assign(labels.begin(), labels.end());
  }
  ds.validate();
  return ds;
}

void save_dataset(const TimeSeriesDataset& ds, const fs::path& dir) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json meta;
  meta["p"] = ds.size();
  meta["m"] = ds.channels();
  meta["n"] = ds.length();
  meta["k"] = ds.num_classes;
  meta["dtype"] = "f32le";
  meta["has_labels"] = ds.has_labels();
  {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
    if (!out) throw IoError("write failed on " + (dir / "meta.json").string());
  }

  std::vector<float> raw(ds.samples.data.begin(), ds.samples.data.end());
  write_binary(dir / "samples.bin", std::move(raw));

  const fs::path labels_path = dir / "labels.bin";
  if (ds.has_labels()) {
    std::vector<std::int32_t> labels(ds.labels.begin(), ds.labels.end());
    write_binary(labels_path, std::move(labels));
  } else {
    fs::remove(labels_path, ec);
  }
}

SplitPair split_train_test(const TimeSeriesDataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("split ratio must lie in (0, 1)");
  const std::size_t p = ds.size();
  if (p < 2) throw ArgumentError("splitting needs at least two samples");

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, 0x5eed5u));
  std::shuffle(order.begin(), order.end(), rng);

  // Both halves stay non-empty.
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(p)));
  n_train = std::clamp<std::size_t>(n_train, 1, p - 1);

  SplitPair out;
  out.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  out.train = ds.subset(out.train_indices);
  out.test = ds.subset(out.test_indices);
  return out;
}

PseudoLabelState stratified_label_mask(const TimeSeriesDataset& ds, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("label fraction must lie in (0, 1]");
  if (!ds.fully_labeled()) throw ArgumentError("label masking needs a fully labeled dataset");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  PseudoLabelState state(ds.size());
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty())
      throw ArgumentError("class " + std::to_string(c) + " has no samples to keep labels for");
    std::mt19937_64 rng(mix_seed(seed, 0x1abe1000u + c));
    std::shuffle(members.begin(), members.end(), rng);
    const auto rounded =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    const std::size_t keep = std::min(members.size(), std::max<std::size_t>(1, rounded));
    for (std::size_t j = 0; j < keep; ++j) state.set_given(members[j], static_cast<int>(c));
  }
  return state;
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw ArgumentError("synthetic data needs at least two classes");
  if (samples_per_class < 1 || channels < 1) throw ArgumentError("synthetic counts must be positive");
  if (length < kMinLength) throw ArgumentError("synthetic length below minimum");
  if (noise_std < 0 || random_offset < 0 || phase_jitter < 0 || amplitude_jitter < 0)
    throw ArgumentError("synthetic noise and jitter must be non-negative");
  if (!(amplitude_scale > 0) || !(frequency_scale > 0))
    throw ArgumentError("synthetic amplitude and frequency scales must be positive");
}

namespace {

TimeSeriesDataset synth_domain(const SynthSpec& spec, std::uint64_t seed, bool shifted) {
  TimeSeriesDataset ds;
  ds.num_classes = spec.num_classes;
  const std::size_t p = spec.samples_per_class * static_cast<std::size_t>(spec.num_classes);
  ds.samples = Tensor3(p, spec.channels, spec.length);
  ds.labels.resize(p);

  std::mt19937_64 rng(mix_seed(seed, 0x5face000u));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double amp_scale = shifted ? spec.amplitude_scale : 1.0;
  const double freq_scale = shifted ? spec.frequency_scale : 1.0;
  const double phase_shift = shifted ? spec.phase_offset : 0.0;
  const double n = static_cast<double>(spec.length);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::size_t i = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++i) {
      ds.labels[i] = k;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double cycles = (1.5 + k) * (1.0 + 0.25 * static_cast<double>(c)) * freq_scale;
        const double base_phase = 0.7 * k + 1.3 * static_cast<double>(c);
        const double phase = base_phase + phase_shift * static_cast<double>(c + 1) +
                             spec.phase_jitter * unit(rng);
        const double amp = amp_scale * (1.0 + spec.amplitude_jitter * unit(rng));
        double level = 0.0;
        if (shifted) {
          level = spec.offset * static_cast<double>(c + 1);
          if (spec.random_offset > 0) level += spec.random_offset * unit(rng);
        }
        for (std::size_t t = 0; t < spec.length; ++t) {
          double v = level + amp * std::sin(two_pi * cycles * static_cast<double>(t) / n + phase);
          if (spec.noise_std > 0) v += spec.noise_std * gauss(rng);
          // Store f32-representable values so the container round-trips exactly.
          ds.samples(i, c, t) = static_cast<float>(v);
        }
      }
    }
  }
  return ds;
}

}  // namespace

std::pair<TimeSeriesDataset, TimeSeriesDataset> make_synthetic_pair(const SynthSpec& spec) {
  spec.validate();
  const std::uint64_t target_seed = spec.target_seed.value_or(mix_seed(spec.seed, 0x7a46e7u));
  return {synth_domain(spec, spec.seed, false), synth_domain(spec, target_seed, true)};
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
  if (count == 0) throw ArgumentError("cannot batch an empty dataset");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, 0xba7c4000u + epoch));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Batch gather(const TimeSeriesDataset& ds, std::span<const std::size_t> indices) {
  TimeSeriesDataset sub = ds.subset(indices);
  return Batch{std::move(sub.samples), std::move(sub.labels),
               std::vector<std::size_t>(indices.begin(), indices.end())};
}

std::vector<Batch> batch_iter(const TimeSeriesDataset& ds, std::size_t batch_size,
                              std::uint64_t seed, std::uint64_t epoch) {
  std::vector<Batch> out;
  for (const auto& idx : epoch_batches(ds.size(), batch_size, seed, epoch))
    out.push_back(gather(ds, idx));
  return out;
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"num_classes", s.num_classes},
           {"samples_per_class", s.samples_per_class},
           {"channels", s.channels},
           {"length", s.length},
           {"amplitude_scale", s.amplitude_scale},
           {"phase_offset", s.phase_offset},
           {"frequency_scale", s.frequency_scale},
           {"offset", s.offset},
           {"random_offset", s.random_offset},
           {"noise_std", s.noise_std},
           {"phase_jitter", s.phase_jitter},
           {"amplitude_jitter", s.amplitude_jitter},
           {"seed", s.seed}};
  j["target_seed"] = s.target_seed ? nlohmann::json(*s.target_seed) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  const SynthSpec d;
  s.num_classes = j.value("num_classes", d.num_classes);
  s.samples_per_class = j.value("samples_per_class", d.samples_per_class);
  s.channels = j.value("channels", d.channels);
  s.length = j.value("length", d.length);
  s.amplitude_scale = j.value("amplitude_scale", d.amplitude_scale);
  s.phase_offset = j.value("phase_offset", d.phase_offset);
  s.frequency_scale = j.value("frequency_scale", d.frequency_scale);
  s.offset = j.value("offset", d.offset);
  s.random_offset = j.value("random_offset", d.random_offset);
  s.noise_std = j.value("noise_std", d.noise_std);
  s.phase_jitter = j.value("phase_jitter", d.phase_jitter);
  s.amplitude_jitter = j.value("amplitude_jitter", d.amplitude_jitter);
  s.seed = j.value("seed", d.seed);
  s.target_seed.reset();
  if (j.contains("target_seed") && !j.at("target_seed").is_null())
    s.target_seed = j.at("target_seed").get<std::uint64_t>();
}

}  // namespace glada::dataio
