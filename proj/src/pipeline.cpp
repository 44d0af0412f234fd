#include "glada/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "glada/checkpoint.hpp"
#include "glada/metrics.hpp"

namespace glada::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(DaMode m) { return m == DaMode::uda ? "uda" : "ssda"; }

DaMode da_mode_from_string(std::string_view s) {
  if (s == "uda") return DaMode::uda;
  if (s == "ssda") return DaMode::ssda;
  throw ArgumentError("unknown adaptation mode '" + std::string(s) + "' (expected uda or ssda)");
}

void ScenarioConfig::validate(bool check_paths) const {
  if (mode == DaMode::ssda && !(labeled_fraction > 0 && labeled_fraction <= 1))
    throw ArgumentError("labeled_fraction must lie in (0, 1] in ssda mode");
  if (!(train_ratio > 0 && train_ratio < 1)) throw ArgumentError("train_ratio must lie in (0, 1)");
  if (probe_epochs < 0) throw ArgumentError("probe_epochs must be non-negative");
  sbc.validate();
  if (encoder) encoder->validate();
  if (check_paths) {
    for (const auto& p : {source_path, target_path})
      if (p.empty() || !fs::is_directory(p))
        throw IoError("dataset directory '" + p.string() + "' does not exist");
  }
}

void to_json(json& j, const ScenarioConfig& c) {
  j = json{{"source_path", c.source_path.string()},
           {"target_path", c.target_path.string()},
           {"mode", to_string(c.mode)},
           {"labeled_fraction", c.labeled_fraction},
           {"train_ratio", c.train_ratio},
           {"hyperparams", c.hyperparams},
           {"sbc", c.sbc},
           {"seed", c.seed},
           {"output_dir", c.output_dir.string()},
           {"export_embeddings", c.export_embeddings},
           {"probe_epochs", c.probe_epochs}};
  j["encoder"] = c.encoder ? json(*c.encoder) : json(nullptr);
}

void from_json(const json& j, ScenarioConfig& c) {
  if (!j.is_object()) throw FormatError("scenario config must be a JSON object");
  const ScenarioConfig d;
  c.source_path = j.value("source_path", std::string());
  c.target_path = j.value("target_path", std::string());
  c.mode = da_mode_from_string(j.value("mode", std::string(to_string(d.mode))));
  c.labeled_fraction = j.value("labeled_fraction", d.labeled_fraction);
  c.train_ratio = j.value("train_ratio", d.train_ratio);
  c.hyperparams = j.contains("hyperparams") ? j.at("hyperparams").get<TrainHyperparams>() : d.hyperparams;
  c.sbc = j.contains("sbc") ? j.at("sbc").get<pseudolabel::SbcConfig>() : d.sbc;
  c.encoder.reset();
  if (j.contains("encoder") && !j.at("encoder").is_null())
    c.encoder = j.at("encoder").get<nets::EncoderConfig>();
  c.seed = j.value("seed", d.seed);
  c.output_dir = j.value("output_dir", std::string());
  c.export_embeddings = j.value("export_embeddings", d.export_embeddings);
  c.probe_epochs = j.value("probe_epochs", d.probe_epochs);
}

ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  ScenarioConfig c;
  try {
    c = j.get<ScenarioConfig>();
  } catch (const json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  // Relative paths are taken relative to the config file.
  const fs::path base = path.parent_path();
  for (fs::path* p : {&c.source_path, &c.target_path, &c.output_dir})
    if (!p->empty() && p->is_relative()) *p = fs::absolute(base / *p).lexically_normal();
  return c;
}

EvalResult evaluate(const nets::Encoder& encoder, const nets::Classifier& classifier,
                    const dataio::TimeSeriesDataset& test) {
  if (!test.fully_labeled()) throw ArgumentError("evaluation needs a fully labeled test set");
  if (classifier.num_classes() != test.num_classes)
    throw ArgumentError("classifier has " + std::to_string(classifier.num_classes()) +
                        " classes but the test set has " + std::to_string(test.num_classes));
  EvalResult r;
  r.predictions = pseudolabel::dnn_predict(encoder, classifier, test.samples);
  r.per_class_f1 = metrics::f1_per_class(test.labels, r.predictions, test.num_classes);
  r.macro_f1 = metrics::macro_f1(r.per_class_f1);
  return r;
}

namespace {

json eval_json(const EvalResult& e) {
  return json{{"macro_f1", e.macro_f1}, {"per_class_f1", e.per_class_f1}};
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json outputs_json(const std::optional<align::DomainOutputs>& o) {
  if (!o) return nullptr;
  return json{{"mean_d_src", o->mean_d_src}, {"mean_d_tgt", o->mean_d_tgt}};
}

Matrix stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

}  // namespace

json RunReport::to_json(bool include_timings) const {
  json j{{"mode", pipeline::to_string(mode)},
         {"lca_enabled", lca_enabled},
         {"ablation", lca_enabled ? "none" : "no-lca"},
         {"adv_loss_mode", glada::to_string(adv_mode)},
         {"seed", seed},
         {"threshold_used", threshold_used},
         {"source_test", eval_json(source_test)},
         {"source_only", eval_json(source_only)},
         {"target_test", eval_json(target_test)},
         {"target_test_predictions", target_test.predictions},
         {"pseudo_label_mf1", optional_json(pseudo_label_mf1)},
         {"pseudo_label_accuracy", optional_json(pseudo_label_accuracy)},
         {"probe_before", outputs_json(probe_before)},
         {"gfa_after", outputs_json(gfa_after)},
         {"within_class_distance", optional_json(within_class_distance)},
         {"config", config}};
  json counts = json::object();
  for (const auto& [name, n] : provenance_counts) counts[name] = n;
  j["provenance_counts"] = counts;
  json am = json::array();
  for (const auto& it : agree_log)
    am.push_back({{"iteration", it.iteration},
                  {"labeled_before", it.labeled_before},
                  {"injected", it.injected},
                  {"labeled_after", it.labeled_after},
                  {"sbc_iterations", it.sbc_iterations},
                  {"finetune_losses", it.finetune_losses}});
  j["agree_log"] = am;
  if (include_timings) {
    json t = json::object();
    for (const auto& [name, s] : timings) t[name] = s;
    j["timings_seconds"] = t;
  }
  return j;
}

Scenario::Scenario(ScenarioConfig config) : config_(std::move(config)) {
  config_.validate(true);
  dataio::TimeSeriesDataset src, tgt;
  try {
    src = dataio::load_dataset(config_.source_path);
    tgt = dataio::load_dataset(config_.target_path);
  } catch (const Error& e) {
    throw StageError("load", e.what());
  }
  split(std::move(src), std::move(tgt));
}

Scenario::Scenario(ScenarioConfig config, dataio::TimeSeriesDataset source,
                   dataio::TimeSeriesDataset target)
    : config_(std::move(config)) {
  config_.validate(false);
  split(std::move(source), std::move(target));
}

void Scenario::split(dataio::TimeSeriesDataset source, dataio::TimeSeriesDataset target) {
  try {
    source.validate();
    target.validate();
    if (!source.fully_labeled()) throw ArgumentError("source domain must be fully labeled");
    if (!target.fully_labeled())
      throw ArgumentError("target domain needs withheld ground-truth labels for evaluation");
    if (source.num_classes != target.num_classes) throw ArgumentError("domains disagree on K");
    if (source.channels() != target.channels())
      throw ArgumentError("domains disagree on the channel count");
    config_.hyperparams.validate(source.num_classes);
    source_ = dataio::split_train_test(source, config_.train_ratio, mix_seed(config_.seed, 100));
    target_ = dataio::split_train_test(target, config_.train_ratio, mix_seed(config_.seed, 101));
    encoder_config().block_lengths(source.length());
    const auto cfg = encoder_config();
    for (auto len : cfg.block_lengths(std::min(source.length(), target.length())))
      if (len == 0) throw ArgumentError("series are too short for the encoder");
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("split", e.what());
  }
  report_.mode = config_.mode;
  report_.seed = config_.seed;
}

nets::EncoderConfig Scenario::encoder_config() const {
  if (config_.encoder) return *config_.encoder;
  const std::size_t m = source_.train.channels();
  return m == 1 ? nets::EncoderConfig::univariate_eeg() : nets::EncoderConfig::multivariate(m);
}

void Scenario::record_time(const std::string& stage, double seconds) {
  report_.timings.emplace_back(stage, seconds);
}

// Checks ordering, annotates failures with the stage name, records wall time.
template <class F>
void Scenario::run_stage(const char* name, int expected, F&& body) {
  if (stage_ != expected)
    throw StageError(name, "stage called out of order (" + std::to_string(stage_) +
                               " stages completed, expected " + std::to_string(expected) + ")");
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  }
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  record_time(name, dt.count());
  ++stage_;
}

void Scenario::pretrain() {
  run_stage("pretrain", 0, [&] {
    auto r = pretrain_source(source_.train, config_.hyperparams, encoder_config(),
                             mix_seed(config_.seed, 200));
    source_encoder_ = std::move(r.encoder);
    source_classifier_ = std::move(r.classifier);
    pretrain_history_ = std::move(r.history);
    report_.source_test = pipeline::evaluate(source_encoder_, source_classifier_, source_.test);
    report_.source_only = pipeline::evaluate(source_encoder_, source_classifier_, target_.test);
  });
}

void Scenario::init_labels() {
  run_stage("init-labels", 1, [&] {
    const auto& hp = config_.hyperparams;
    if (config_.mode == DaMode::ssda) {
      state_ = dataio::stratified_label_mask(target_.train, config_.labeled_fraction,
                                            mix_seed(config_.seed, 300));
      report_.threshold_used = 0;
      return;
    }
    const double floor = 1.0 / target_.train.num_classes + 0.05;
    double tau = hp.threshold;
    while (true) {
      state_ = pseudolabel::initial_threshold_labels(source_encoder_, source_classifier_,
                                                     target_.train, tau);
      if (state_.labeled_count() > 0) break;
      if (tau <= floor + 1e-12)
        throw EmptyLabelSetError("no target sample exceeds the confidence threshold, even at " +
                                 std::to_string(tau));
      tau = std::max(tau - 0.1, floor);
    }
    report_.threshold_used = tau;
  });
}

void Scenario::init_target() {
  run_stage("init-target", 2, [&] {
    target_encoder_ = nets::init_target_from_source(source_encoder_);
  });
}

void Scenario::agree() {
  run_stage("agree", 3, [&] {
    auto r = pseudolabel::run_agree_mechanism(target_encoder_, source_classifier_, target_.train,
                                              state_, config_.hyperparams, config_.sbc,
                                              mix_seed(config_.seed, 400));
    state_ = std::move(r.state);
    report_.agree_log = std::move(r.log);

    std::vector<int> y_true, y_pseudo;
    for (std::size_t i = 0; i < state_.size(); ++i) {
      const auto& e = state_[i];
      if (!e.labeled() || e.provenance == Provenance::given) continue;
      y_true.push_back(target_.train.labels[i]);
      y_pseudo.push_back(e.label);
    }
    if (!y_true.empty()) {
      report_.pseudo_label_mf1 = metrics::macro_f1(y_true, y_pseudo, target_.train.num_classes);
      report_.pseudo_label_accuracy = metrics::accuracy(y_true, y_pseudo);
    }
    report_.provenance_counts.clear();
    for (auto p : {Provenance::given, Provenance::init_threshold, Provenance::agreed,
                   Provenance::abandoned, Provenance::unlabeled})
      report_.provenance_counts.emplace_back(std::string(glada::to_string(p)), state_.count(p));
  });
}

dataio::TimeSeriesDataset Scenario::labeled_target() const {
  const auto idx = state_.labeled_indices();
  auto ds = target_.train.subset(idx);
  ds.labels.clear();
  for (auto i : idx) ds.labels.push_back(state_[i].label);
  return ds;
}

void Scenario::adapt() {
  run_stage("adapt", 4, [&] {
    const auto& hp = config_.hyperparams;
    const auto tl = labeled_target();
    const std::size_t dim = source_encoder_.config().feature_dim;
    if (config_.probe_epochs > 0) {
      report_.probe_before = align::probe_discriminator(
          source_encoder_.infer(source_.train.samples), target_encoder_.infer(target_.train.samples),
          source_encoder_.infer(source_.test.samples), target_encoder_.infer(target_.test.samples),
          hp, config_.probe_epochs, mix_seed(config_.seed, 700));
    }
    discriminator_ = nets::Discriminator(dim, dim, mix_seed(config_.seed, 501));
    auto bank = align::init_center_bank(source_encoder_, source_.train);
    auto r = align::adapt(source_encoder_, target_encoder_, discriminator_, source_.train, tl,
                          std::move(bank), hp, mix_seed(config_.seed, 500));
    bank_ = std::move(r.bank);
    adapt_history_ = std::move(r.history);

    const Matrix fs = source_encoder_.infer(source_.test.samples);
    const Matrix ft = target_encoder_.infer(target_.test.samples);
    report_.gfa_after = align::mean_discriminator_outputs(discriminator_, fs, ft);
    std::vector<int> labels = source_.test.labels;
    labels.insert(labels.end(), target_.test.labels.begin(), target_.test.labels.end());
    report_.within_class_distance =
        align::within_class_distance(stack(fs, ft), labels, source_.test.num_classes);
  });
}

void Scenario::shared_classifier() {
  run_stage("shared-classifier", 5, [&] {
    shared_classifier_ = align::train_shared_classifier(source_encoder_, target_encoder_,
                                                        source_.train, labeled_target(),
                                                        config_.hyperparams,
                                                        mix_seed(config_.seed, 600));
  });
}

void Scenario::evaluate() {
  run_stage("evaluate", 6, [&] {
    report_.target_test = pipeline::evaluate(target_encoder_, shared_classifier_, target_.test);
    report_.lca_enabled = config_.hyperparams.lca_enabled;
    report_.adv_mode = config_.hyperparams.adv_mode;
    report_.mode = config_.mode;
    report_.seed = config_.seed;
    report_.config = config_;
  });
}

RunReport Scenario::run() {
  pretrain();
  init_labels();
  init_target();
  agree();
  adapt();
  shared_classifier();
  evaluate();
  if (!config_.output_dir.empty()) write_outputs(report_);
  return report_;
}

void Scenario::write_outputs(const RunReport& report) const {
  try {
    const fs::path out = config_.output_dir;
    if (out.empty()) throw ArgumentError("no output directory configured");
    fs::create_directories(out / "checkpoints");
    const auto write_json = [](const json& j, const fs::path& p) {
      std::ofstream f(p, std::ios::trunc);
      if (!f) throw IoError("cannot write " + p.string());
      f << j.dump(2) << '\n';
      if (!f) throw IoError("write failed on " + p.string());
    };
    write_json(report.to_json(true), out / "report.json");
    write_json(json(config_), out / "config.json");
    pseudolabel::write_audit(state_, out / "pseudo_labels.jsonl");
    write_history(pretrain_history_, out / "pretrain_history.jsonl");
    align::write_metrics(adapt_history_, out / "adapt_metrics.jsonl");
    const fs::path ck = out / "checkpoints";
    nets::save(source_encoder_, ck / "source_encoder");
    nets::save(source_classifier_, ck / "source_classifier");
    if (stage_ >= 3) nets::save(target_encoder_, ck / "target_encoder");
    if (stage_ >= 5) nets::save(discriminator_, ck / "discriminator");
    if (stage_ >= 6) nets::save(shared_classifier_, ck / "shared_classifier");
    if (config_.export_embeddings && stage_ >= 5)
      export_embeddings(source_encoder_, target_encoder_, source_.test, target_.test,
                        out / "embeddings.tsv");
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("write-outputs", e.what());
  } catch (const fs::filesystem_error& e) {
    throw StageError("write-outputs", e.what());
  }
}

RunReport run_scenario(const ScenarioConfig& config) {
  Scenario s(config);
  return s.run();
}

void export_embeddings(const nets::Encoder& source_encoder, const nets::Encoder& target_encoder,
                       const dataio::TimeSeriesDataset& source_test,
                       const dataio::TimeSeriesDataset& target_test, const fs::path& path) {
  if (!source_test.fully_labeled() || !target_test.fully_labeled())
    throw ArgumentError("embedding export needs labeled test sets");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  const auto dump = [&](const Matrix& f, const std::vector<int>& labels, const char* tag) {
    for (std::size_t i = 0; i < f.rows; ++i) {
      out << tag << '\t' << labels[i];
      for (Real v : f.row(i)) out << '\t' << v;
      out << '\n';
    }
  };
  dump(source_encoder.infer(source_test.samples), source_test.labels, "src");
  dump(target_encoder.infer(target_test.samples), target_test.labels, "tgt");
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace glada::pipeline
