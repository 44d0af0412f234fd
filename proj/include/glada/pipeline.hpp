#pragma once

// Scenario orchestration. A Scenario holds every intermediate artifact and
// exposes each stage separately, so callers can stop after any stage, copy
// the object, and continue the copies with different settings.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glada/align.hpp"
#include "glada/dataio.hpp"
#include "glada/label_state.hpp"
#include "glada/nets.hpp"
#include "glada/pretrain.hpp"
#include "glada/pseudolabel.hpp"

namespace glada::pipeline {

enum class DaMode { uda, ssda };

std::string_view to_string(DaMode m);
DaMode da_mode_from_string(std::string_view s);

struct ScenarioConfig {
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  DaMode mode = DaMode::uda;
  double labeled_fraction = 0.01;  // ssda only
  double train_ratio = 0.7;
  TrainHyperparams hyperparams;
  pseudolabel::SbcConfig sbc;
  // Unset: single-channel data uses the EEG backbone, otherwise the multivariate one.
  std::optional<nets::EncoderConfig> encoder;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  bool export_embeddings = false;
  // Epochs of the frozen-feature discriminator probe; 0 disables it.
  int probe_epochs = 10;

  // Checks values; paths are checked only when check_paths is set.
  void validate(bool check_paths) const;
};

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);
ScenarioConfig load_config(const std::filesystem::path& path);

// Failure inside a named stage of run_scenario.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct EvalResult {
  Real macro_f1 = 0;
  std::vector<Real> per_class_f1;
  std::vector<int> predictions;
};

// argmax classifier(encoder(x)) in eval mode against the dataset labels.
EvalResult evaluate(const nets::Encoder& encoder, const nets::Classifier& classifier,
                    const dataio::TimeSeriesDataset& test);

struct RunReport {
  DaMode mode = DaMode::uda;
  bool lca_enabled = true;
  AdvLossMode adv_mode = AdvLossMode::shared_half;
  std::uint64_t seed = 0;
  double threshold_used = 0;  // uda: tau after any fallback

  EvalResult source_test;   // source model on source test
  EvalResult source_only;   // source model on target test
  EvalResult target_test;   // target encoder + shared classifier on target test

  // Pseudo labels other than `given`, scored against the withheld labels.
  std::optional<Real> pseudo_label_mf1;
  std::optional<Real> pseudo_label_accuracy;
  std::vector<std::pair<std::string, std::size_t>> provenance_counts;
  std::vector<pseudolabel::AgreeIteration> agree_log;

  // Mean discriminator outputs on held-out features.
  std::optional<align::DomainOutputs> probe_before;  // fresh discriminator, pre-adaptation features
  std::optional<align::DomainOutputs> gfa_after;     // adapted discriminator, adapted features
  std::optional<Real> within_class_distance;         // pooled test features, true labels

  std::vector<std::pair<std::string, double>> timings;  // stage name -> seconds
  nlohmann::json config;

  nlohmann::json to_json(bool include_timings = true) const;
};

class Scenario {
 public:
  // Loads both domains from the configured paths.
  explicit Scenario(ScenarioConfig config);
  // Uses in-memory datasets; the configured paths are ignored.
  Scenario(ScenarioConfig config, dataio::TimeSeriesDataset source, dataio::TimeSeriesDataset target);

  // Stage functions, in order. Each throws StageError naming the stage.
  void pretrain();
  void init_labels();
  void init_target();
  void agree();
  void adapt();
  void shared_classifier();
  void evaluate();
  const RunReport& report() const { return report_; }

  // All stages, then report; writes outputs when output_dir is set.
  RunReport run();
  void write_outputs(const RunReport& report) const;

  ScenarioConfig& config() { return config_; }
  const ScenarioConfig& config() const { return config_; }
  const dataio::SplitPair& source_split() const { return source_; }
  const dataio::SplitPair& target_split() const { return target_; }
  const nets::Encoder& source_encoder() const { return source_encoder_; }
  const nets::Encoder& target_encoder() const { return target_encoder_; }
  const nets::Classifier& source_classifier() const { return source_classifier_; }
  const nets::Classifier& shared_classifier_net() const { return shared_classifier_; }
  const nets::Discriminator& discriminator() const { return discriminator_; }
  const PseudoLabelState& label_state() const { return state_; }
  const align::CenterBank& center_bank() const { return bank_; }
  const std::vector<EpochLoss>& pretrain_history() const { return pretrain_history_; }
  const std::vector<align::EpochMetrics>& adapt_history() const { return adapt_history_; }
  int completed_stages() const { return stage_; }

  // Target training samples that survived labeling, with their pseudo labels.
  dataio::TimeSeriesDataset labeled_target() const;

 private:
  void split(dataio::TimeSeriesDataset source, dataio::TimeSeriesDataset target);
  nets::EncoderConfig encoder_config() const;
  void record_time(const std::string& stage, double seconds);
  template <class F>
  void run_stage(const char* name, int expected, F&& body);

  ScenarioConfig config_;
  dataio::SplitPair source_;
  dataio::SplitPair target_;
  nets::Encoder source_encoder_;
  nets::Classifier source_classifier_;
  nets::Encoder target_encoder_;
  nets::Classifier shared_classifier_;
  nets::Discriminator discriminator_;
  align::CenterBank bank_;
  PseudoLabelState state_;
  std::vector<EpochLoss> pretrain_history_;
  std::vector<align::EpochMetrics> adapt_history_;
  RunReport report_;
  int stage_ = 0;  // number of completed stages
};

RunReport run_scenario(const ScenarioConfig& config);

// Tab-separated rows: domain tag (src/tgt), true label, feature values.
void export_embeddings(const nets::Encoder& source_encoder, const nets::Encoder& target_encoder,
                       const dataio::TimeSeriesDataset& source_test,
                       const dataio::TimeSeriesDataset& target_test,
                       const std::filesystem::path& path);

}  // namespace glada::pipeline
