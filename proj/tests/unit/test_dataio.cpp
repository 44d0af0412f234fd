#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "glada/dataio.hpp"

using namespace glada;
using namespace glada::dataio;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("glada_test_" + name);
  fs::remove_all(p);
  return p;
}

TimeSeriesDataset random_dataset(std::size_t p, std::size_t m, std::size_t n, int k,
                                 std::uint64_t seed, bool labels = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  TimeSeriesDataset ds;
  ds.num_classes = k;
  ds.samples = Tensor3(p, m, n);
  for (auto& v : ds.samples.data) v = static_cast<float>(g(rng));
  if (labels) {
    ds.labels.resize(p);
    for (std::size_t i = 0; i < p; ++i) ds.labels[i] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return ds;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.num_classes = 3;
  s.samples_per_class = 10;
  s.channels = 2;
  s.length = 16;
  return s;
}

}  // namespace

TEST(DataIo, RoundTripIsBitExact) {
  const auto dir = scratch_dir("roundtrip");
  for (bool labels : {true, false}) {
    auto ds = random_dataset(13, 3, 21, 4, 5, labels);
    if (labels) ds.labels[2] = -1;
    save_dataset(ds, dir);
    EXPECT_EQ(load_dataset(dir), ds);
    EXPECT_EQ(fs::exists(dir / "labels.bin"), labels);
  }
}

TEST(DataIo, FileLayout) {
  const auto dir = scratch_dir("layout");
  TimeSeriesDataset ds;
  ds.num_classes = 2;
  ds.samples = Tensor3(1, 1, 8);
  ds.samples.data = {1.0, -2.5, 0, 0, 0, 0, 0, 0};
  ds.labels = {1};
  save_dataset(ds, dir);
  EXPECT_EQ(fs::file_size(dir / "samples.bin"), 32u);
  EXPECT_EQ(fs::file_size(dir / "labels.bin"), 4u);
  std::ifstream in(dir / "samples.bin", std::ios::binary);
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  // 1.0f = 0x3f800000 little-endian
  EXPECT_EQ(b[0], 0x00);
  EXPECT_EQ(b[3], 0x3f);
  EXPECT_EQ(b[2], 0x80);
  const auto meta = nlohmann::json::parse(std::ifstream(dir / "meta.json"));
  EXPECT_EQ(meta["p"], 1);
  EXPECT_EQ(meta["dtype"], "f32le");
  EXPECT_EQ(meta["has_labels"], true);
}

TEST(DataIo, LoadRejectsBrokenContainers) {
  const auto dir = scratch_dir("broken");
  EXPECT_THROW(load_dataset(dir), IoError);
  const auto ds = random_dataset(4, 1, 8, 2, 1);
  save_dataset(ds, dir);
  fs::resize_file(dir / "samples.bin", 12);
  EXPECT_THROW(load_dataset(dir), Error);
  save_dataset(ds, dir);
  std::ofstream(dir / "meta.json") << R"({"p":4,"m":1,"n":8,"k":2,"dtype":"f64","has_labels":true})";
  EXPECT_THROW(load_dataset(dir), FormatError);
  save_dataset(ds, dir);
  std::ofstream(dir / "meta.json") << "{ not json";
  EXPECT_THROW(load_dataset(dir), FormatError);
}

TEST(DataIo, ValidateRejectsBadLabels) {
  auto ds = random_dataset(4, 1, 8, 2, 1);
  ds.labels[0] = 2;
  EXPECT_THROW(ds.validate(), Error);
  ds.labels[0] = -2;
  EXPECT_THROW(ds.validate(), Error);
  ds.labels.pop_back();
  EXPECT_THROW(ds.validate(), Error);
}

TEST(DataIo, SplitCountsAndPartition) {
  const auto ds = random_dataset(10, 1, 8, 2, 1);
  const auto s = split_train_test(ds, 0.7, 42);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.test.size(), 3u);
  std::set<std::size_t> all(s.train_indices.begin(), s.train_indices.end());
  all.insert(s.test_indices.begin(), s.test_indices.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(*all.rbegin(), 9u);

  const auto again = split_train_test(ds, 0.7, 42);
  EXPECT_EQ(again.train_indices, s.train_indices);
  EXPECT_EQ(again.train, s.train);
  EXPECT_THROW(split_train_test(ds, 1.0, 1), ArgumentError);
  EXPECT_THROW(split_train_test(ds, 0.0, 1), ArgumentError);
}

TEST(DataIo, SplitPermutesLabelsWithSamples) {
  const auto ds = random_dataset(50, 2, 8, 5, 3);
  const auto s = split_train_test(ds, 0.6, 9);
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    const std::size_t src = s.train_indices[i];
    EXPECT_EQ(s.train.labels[i], ds.labels[src]);
    EXPECT_TRUE(std::equal(s.train.samples.slab(i).begin(), s.train.samples.slab(i).end(),
                           ds.samples.slab(src).begin()));
  }
}

TEST(DataIo, SplitPropertyOverRandomSizes) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = 2 + rng() % 200;
    const double ratio = 0.05 + 0.9 * std::uniform_real_distribution<double>()(rng);
    const auto s = split_train_test(random_dataset(p, 1, 8, 2, trial), ratio, trial);
    std::vector<std::size_t> idx = s.train_indices;
    idx.insert(idx.end(), s.test_indices.begin(), s.test_indices.end());
    std::sort(idx.begin(), idx.end());
    std::vector<std::size_t> expect(p);
    std::iota(expect.begin(), expect.end(), std::size_t{0});
    EXPECT_EQ(idx, expect);
  }
}

TEST(DataIo, StratifiedMaskCounts) {
  TimeSeriesDataset ds = random_dataset(1200, 1, 8, 2, 1);
  auto st = stratified_label_mask(ds, 0.01, 5);
  EXPECT_EQ(st.count(Provenance::given), 12u);
  std::size_t per_class[2] = {0, 0};
  for (std::size_t i = 0; i < st.size(); ++i)
    if (st[i].labeled()) {
      EXPECT_EQ(st[i].label, ds.labels[i]);
      ++per_class[st[i].label];
    }
  EXPECT_EQ(per_class[0], 6u);
  EXPECT_EQ(per_class[1], 6u);

  const auto full = stratified_label_mask(ds, 1.0, 5);
  EXPECT_EQ(full.count(Provenance::given), ds.size());

  TimeSeriesDataset small = random_dataset(60, 1, 8, 2, 1);  // 30 per class
  EXPECT_EQ(stratified_label_mask(small, 0.01, 3).count(Provenance::given), 2u);
  EXPECT_EQ(stratified_label_mask(small, 0.01, 3), stratified_label_mask(small, 0.01, 3));
}

TEST(DataIo, StratifiedMaskRejectsEmptyClass) {
  TimeSeriesDataset ds = random_dataset(6, 1, 8, 3, 1);
  for (auto& y : ds.labels) y = y == 2 ? 0 : y;
  EXPECT_THROW(stratified_label_mask(ds, 0.5, 1), ArgumentError);
}

TEST(DataIo, SyntheticShapesAndBalance) {
  SynthSpec s;
  s.num_classes = 6;
  s.samples_per_class = 100;
  const auto [src, tgt] = make_synthetic_pair(s);
  EXPECT_EQ(src.size(), 600u);
  EXPECT_EQ(tgt.size(), 600u);
  EXPECT_TRUE(src.fully_labeled());
  EXPECT_TRUE(tgt.fully_labeled());
  std::vector<int> counts(6, 0);
  for (int y : src.labels) ++counts[static_cast<std::size_t>(y)];
  for (int c : counts) EXPECT_EQ(c, 100);
}

TEST(DataIo, SyntheticZeroShiftIsIdentity) {
  auto s = small_spec();
  s.target_seed = s.seed;
  const auto [src, tgt] = make_synthetic_pair(s);
  EXPECT_EQ(src, tgt);

  s.amplitude_scale = 0.5;
  const auto [src2, tgt2] = make_synthetic_pair(s);
  EXPECT_EQ(src2, src);
  EXPECT_NE(tgt2, tgt);
  for (std::size_t i = 0; i < tgt.samples.data.size(); ++i)
    EXPECT_NEAR(tgt2.samples.data[i], 0.5 * tgt.samples.data[i], 1e-6);
}

TEST(DataIo, SyntheticIsDeterministicAndRoundTrips) {
  auto s = small_spec();
  s.noise_std = 0.2;
  s.random_offset = 1.0;
  EXPECT_EQ(make_synthetic_pair(s), make_synthetic_pair(s));
  const auto dir = scratch_dir("synth");
  const auto [src, tgt] = make_synthetic_pair(s);
  save_dataset(tgt, dir);
  EXPECT_EQ(load_dataset(dir), tgt);
}

TEST(DataIo, SynthSpecJsonAndValidation) {
  auto s = small_spec();
  s.offset = 0.3;
  s.random_offset = 2.0;
  s.target_seed = 11;
  const SynthSpec back = nlohmann::json(s).get<SynthSpec>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(s));
  s.num_classes = 1;
  EXPECT_THROW(s.validate(), ArgumentError);
  s = small_spec();
  s.noise_std = -1;
  EXPECT_THROW(s.validate(), ArgumentError);
  s = small_spec();
  s.length = 4;
  EXPECT_THROW(s.validate(), ArgumentError);
}

TEST(DataIo, BatchIterCoversEpochOnce) {
  const auto ds = random_dataset(10, 1, 8, 3, 2);
  const auto batches = batch_iter(ds, 4, 1, 0);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].labels.size(), 4u);
  EXPECT_EQ(batches[1].labels.size(), 4u);
  EXPECT_EQ(batches[2].labels.size(), 2u);

  std::vector<int> seen;
  std::vector<std::size_t> idx;
  for (const auto& b : batches) {
    seen.insert(seen.end(), b.labels.begin(), b.labels.end());
    idx.insert(idx.end(), b.indices.begin(), b.indices.end());
  }
  auto expect = ds.labels;
  std::sort(seen.begin(), seen.end());
  std::sort(expect.begin(), expect.end());
  EXPECT_EQ(seen, expect);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], i);

  EXPECT_EQ(epoch_batches(10, 4, 1, 0), epoch_batches(10, 4, 1, 0));
  EXPECT_NE(epoch_batches(10, 4, 1, 0), epoch_batches(10, 4, 1, 1));
  EXPECT_THROW(epoch_batches(0, 4, 1, 0), ArgumentError);
  EXPECT_THROW(epoch_batches(5, 0, 1, 0), ArgumentError);
}
