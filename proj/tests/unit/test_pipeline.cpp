#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "glada/pipeline.hpp"

using namespace glada;
using namespace glada::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("glada_test_" + name);
  fs::remove_all(p);
  return p;
}

std::pair<dataio::TimeSeriesDataset, dataio::TimeSeriesDataset> tiny_pair() {
  dataio::SynthSpec s;
  s.num_classes = 3;
  s.samples_per_class = 20;
  s.channels = 2;
  s.length = 16;
  s.amplitude_scale = 0.8;
  s.noise_std = 0.2;
  s.seed = 4;
  return dataio::make_synthetic_pair(s);
}

ScenarioConfig tiny_config() {
  ScenarioConfig c;
  c.seed = 1;
  auto& hp = c.hyperparams;
  hp.epochs_pretrain = 5;
  hp.lr_src_enc = 1e-2;
  hp.epochs_am = 2;
  hp.epochs_adapt = 2;
  hp.epochs_shared_classifier = 2;
  hp.batch_size = 16;
  nets::EncoderConfig e = nets::EncoderConfig::multivariate(2);
  e.mid_channels = 4;
  e.feature_dim = 8;
  c.encoder = e;
  c.probe_epochs = 1;
  return c;
}

}  // namespace

TEST(Pipeline, RunReportIsDeterministic) {
  const auto [src, tgt] = tiny_pair();
  Scenario a(tiny_config(), src, tgt), b(tiny_config(), src, tgt);
  const auto ra = a.run(), rb = b.run();
  EXPECT_EQ(ra.to_json(false).dump(), rb.to_json(false).dump());
  EXPECT_EQ(a.target_encoder().params(), b.target_encoder().params());
  EXPECT_EQ(a.shared_classifier_net().params(), b.shared_classifier_net().params());
  EXPECT_EQ(a.completed_stages(), 7);
}

TEST(Pipeline, ReportContents) {
  const auto [src, tgt] = tiny_pair();
  Scenario s(tiny_config(), src, tgt);
  const auto r = s.run();
  const auto j = r.to_json(true);
  EXPECT_EQ(j["mode"], "uda");
  EXPECT_EQ(j["ablation"], "none");
  EXPECT_EQ(j["adv_loss_mode"], "shared-half");
  EXPECT_TRUE(j.contains("timings_seconds"));
  EXPECT_FALSE(r.to_json(false).contains("timings_seconds"));
  EXPECT_EQ(r.target_test.predictions.size(), s.target_split().test.size());
  EXPECT_EQ(r.source_only.per_class_f1.size(), 3u);
  EXPECT_TRUE(r.probe_before.has_value());
  EXPECT_TRUE(r.gfa_after.has_value());
  EXPECT_TRUE(r.within_class_distance.has_value());
  EXPECT_EQ(r.agree_log.size(), 2u);
  std::size_t total = 0;
  for (const auto& [name, n] : r.provenance_counts) total += n;
  EXPECT_EQ(total, s.target_split().train.size());
  EXPECT_GE(r.threshold_used, 1.0 / 3 + 0.05 - 1e-12);
  EXPECT_EQ(r.timings.size(), 7u);
}

TEST(Pipeline, StagesRunOnlyInOrder) {
  const auto [src, tgt] = tiny_pair();
  Scenario s(tiny_config(), src, tgt);
  EXPECT_THROW(s.adapt(), StageError);
  s.pretrain();
  EXPECT_THROW(s.pretrain(), StageError);
  try {
    s.agree();
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "agree");
  }
  s.init_labels();
  s.init_target();
  EXPECT_EQ(s.completed_stages(), 3);
}

TEST(Pipeline, CopiedScenarioBranchesForAblation) {
  const auto [src, tgt] = tiny_pair();
  Scenario s(tiny_config(), src, tgt);
  s.pretrain();
  s.init_labels();
  s.init_target();
  s.agree();
  Scenario off = s;
  off.config().hyperparams.lca_enabled = false;
  const auto initial_bank = align::init_center_bank(off.source_encoder(), off.source_split().train);
  s.adapt();
  s.shared_classifier();
  s.evaluate();
  off.adapt();
  off.shared_classifier();
  off.evaluate();
  EXPECT_TRUE(s.report().lca_enabled);
  EXPECT_FALSE(off.report().lca_enabled);
  EXPECT_EQ(off.report().to_json()["ablation"], "no-lca");
  EXPECT_EQ(off.center_bank(), initial_bank)
      << "the bank must not move without LCA";
  EXPECT_EQ(s.report().source_only.macro_f1, off.report().source_only.macro_f1);
}

TEST(Pipeline, SsdaModeKeepsGivenLabels) {
  const auto [src, tgt] = tiny_pair();
  auto cfg = tiny_config();
  cfg.mode = DaMode::ssda;
  cfg.labeled_fraction = 0.1;
  Scenario s(cfg, src, tgt);
  s.pretrain();
  s.init_labels();
  const auto given = s.label_state();
  EXPECT_EQ(given.count(Provenance::given), given.labeled_count());
  EXPECT_GE(given.labeled_count(), 3u);
  s.init_target();
  s.agree();
  for (std::size_t i = 0; i < given.size(); ++i) {
    if (given[i].provenance == Provenance::given) {
      EXPECT_EQ(s.label_state()[i], given[i]);
      EXPECT_EQ(given[i].label, s.target_split().train.labels[i]);
    }
  }
}

TEST(Pipeline, ThresholdFallsBackThenFails) {
  const auto [src, tgt] = tiny_pair();
  auto cfg = tiny_config();
  cfg.hyperparams.threshold = 0.999999;
  Scenario s(cfg, src, tgt);
  s.pretrain();
  s.init_labels();
  EXPECT_GT(s.label_state().labeled_count(), 0u);
  EXPECT_LE(s.report().threshold_used, 0.999999);

  // Constant inputs carry no class evidence, so a trained model outputs the
  // class priors, which stay below the fallback floor 1/K + 0.05.
  dataio::TimeSeriesDataset flat;
  flat.num_classes = 4;
  flat.samples = Tensor3(160, 2, 16, 0.0);
  for (std::size_t i = 0; i < 160; ++i) flat.labels.push_back(static_cast<int>(i % 4));
  cfg.hyperparams.epochs_pretrain = 30;
  Scenario f(cfg, flat, flat);
  f.pretrain();
  try {
    f.init_labels();
    FAIL() << "expected the threshold fallback to give up";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "init-labels");
    EXPECT_NE(std::string(e.what()).find("threshold"), std::string::npos);
  }
}

TEST(Pipeline, WriteOutputsAndExport) {
  const auto [src, tgt] = tiny_pair();
  auto cfg = tiny_config();
  cfg.output_dir = scratch_dir("pipeline_out");
  cfg.export_embeddings = true;
  Scenario s(cfg, src, tgt);
  s.run();
  for (const char* f : {"report.json", "config.json", "pseudo_labels.jsonl", "pretrain_history.jsonl",
                        "adapt_metrics.jsonl", "embeddings.tsv"})
    EXPECT_TRUE(fs::exists(cfg.output_dir / f)) << f;
  for (const char* c : {"source_encoder", "source_classifier", "target_encoder", "discriminator",
                        "shared_classifier"})
    EXPECT_TRUE(fs::exists(cfg.output_dir / "checkpoints" / c / "net.json")) << c;

  std::ifstream in(cfg.output_dir / "embeddings.tsv");
  std::string line;
  std::size_t rows = 0, src_rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::size_t cols = 1;
    for (char ch : line) cols += ch == '\t' ? 1 : 0;
    EXPECT_EQ(cols, 2u + 8u);
    src_rows += line.rfind("src\t", 0) == 0 ? 1 : 0;
  }
  EXPECT_EQ(rows, s.source_split().test.size() + s.target_split().test.size());
  EXPECT_EQ(src_rows, s.source_split().test.size());

  std::ifstream m(cfg.output_dir / "adapt_metrics.jsonl");
  std::size_t epochs = 0;
  while (std::getline(m, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"epoch", "loss_disc", "loss_enc_src", "loss_enc_tgt", "loss_center",
                          "mean_d_src", "mean_d_tgt"})
      EXPECT_TRUE(j.contains(k)) << k;
    ++epochs;
  }
  EXPECT_EQ(epochs, 2u);
}

TEST(Pipeline, ConfigRoundTripAndRelativePaths) {
  const auto dir = scratch_dir("config");
  fs::create_directories(dir / "sub");
  auto cfg = tiny_config();
  cfg.mode = DaMode::ssda;
  cfg.hyperparams.adv_mode = AdvLossMode::literal;
  const nlohmann::json j = cfg;
  EXPECT_EQ(nlohmann::json(j.get<ScenarioConfig>()).dump(), j.dump());

  std::ofstream(dir / "sub" / "c.json") << R"({"source_path": "data/s", "target_path": "/abs/t", "seed": 9})";
  const auto loaded = load_config(dir / "sub" / "c.json");
  EXPECT_EQ(loaded.source_path, fs::absolute(dir / "sub" / "data" / "s").lexically_normal());
  EXPECT_EQ(loaded.target_path, fs::path("/abs/t"));
  EXPECT_EQ(loaded.seed, 9u);
  EXPECT_EQ(loaded.hyperparams.epochs_adapt, 50);

  std::ofstream(dir / "bad.json") << "[1, 2";
  EXPECT_THROW(load_config(dir / "bad.json"), FormatError);
  EXPECT_THROW(load_config(dir / "none.json"), IoError);
  EXPECT_THROW(da_mode_from_string("semi"), ArgumentError);

  ScenarioConfig missing;
  missing.source_path = dir / "nope";
  missing.target_path = dir / "nope";
  EXPECT_THROW(Scenario{missing}, IoError);
}

TEST(Pipeline, LoadsDatasetsFromDisk) {
  const auto dir = scratch_dir("disk");
  const auto [src, tgt] = tiny_pair();
  dataio::save_dataset(src, dir / "source");
  dataio::save_dataset(tgt, dir / "target");
  auto cfg = tiny_config();
  cfg.source_path = dir / "source";
  cfg.target_path = dir / "target";
  Scenario disk(cfg);
  Scenario mem(tiny_config(), src, tgt);
  EXPECT_EQ(disk.source_split().train, mem.source_split().train);
  EXPECT_EQ(disk.target_split().test, mem.target_split().test);

  auto other = tgt;
  other.samples = Tensor3(tgt.size(), 3, tgt.length());
  dataio::save_dataset(other, dir / "target");
  EXPECT_THROW(Scenario{cfg}, Error);
}

TEST(Pipeline, EvaluateScoresPredictions) {
  const auto [src, tgt] = tiny_pair();
  Scenario s(tiny_config(), src, tgt);
  s.pretrain();
  const auto e = evaluate(s.source_encoder(), s.source_classifier(), s.source_split().test);
  EXPECT_EQ(e.predictions.size(), s.source_split().test.size());
  EXPECT_DOUBLE_EQ(e.macro_f1, s.report().source_test.macro_f1);
}
