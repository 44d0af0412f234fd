#include "glada/pretrain.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace glada {

using nlohmann::json;

std::string_view to_string(AdvLossMode m) {
  return m == AdvLossMode::shared_half ? "shared-half" : "literal";
}

AdvLossMode adv_mode_from_string(std::string_view s) {
  if (s == "shared-half") return AdvLossMode::shared_half;
  if (s == "literal") return AdvLossMode::literal;
  throw ArgumentError("unknown adversarial mode '" + std::string(s) +
                      "' (expected shared-half or literal)");
}

void TrainHyperparams::validate(int num_classes) const {
  if (num_classes < 2) throw ArgumentError("training needs at least two classes");
  if (epochs_pretrain < 1 || epochs_am < 1 || epochs_adapt < 1 || epochs_shared_classifier < 1)
    throw ArgumentError("epoch counts must be at least 1");
  if (finetune_passes < 0) throw ArgumentError("finetune passes must be non-negative");
  for (double lr : {lr_src_enc, lr_tgt_enc, lr_disc, lr_clf, lr_center})
    if (!(lr > 0)) throw ArgumentError("learning rates must be positive");
  if (!(threshold > 1.0 / num_classes && threshold < 1.0))
    throw ArgumentError("threshold must lie in (1/K, 1)");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw ArgumentError("Adam betas must lie in [0, 1)");
  if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
  if (!(center_weight >= 0)) throw ArgumentError("center weight must be non-negative");
}

void to_json(json& j, const TrainHyperparams& hp) {
  j = json{{"epochs_pretrain", hp.epochs_pretrain},
           {"epochs_am", hp.epochs_am},
           {"epochs_adapt", hp.epochs_adapt},
           {"epochs_shared_classifier", hp.epochs_shared_classifier},
           {"finetune_passes", hp.finetune_passes},
           {"threshold", hp.threshold},
           {"lr_src_enc", hp.lr_src_enc},
           {"lr_tgt_enc", hp.lr_tgt_enc},
           {"lr_disc", hp.lr_disc},
           {"lr_clf", hp.lr_clf},
           {"lr_center", hp.lr_center},
           {"betas", {hp.beta1, hp.beta2}},
           {"batch_size", hp.batch_size},
           {"adv_loss_mode", to_string(hp.adv_mode)},
           {"lca_enabled", hp.lca_enabled},
           {"center_weight", hp.center_weight}};
}

void from_json(const json& j, TrainHyperparams& hp) {
  const TrainHyperparams d;
  hp.epochs_pretrain = j.value("epochs_pretrain", d.epochs_pretrain);
  hp.epochs_am = j.value("epochs_am", d.epochs_am);
  hp.epochs_adapt = j.value("epochs_adapt", d.epochs_adapt);
  hp.epochs_shared_classifier = j.value("epochs_shared_classifier", d.epochs_shared_classifier);
  hp.finetune_passes = j.value("finetune_passes", d.finetune_passes);
  hp.threshold = j.value("threshold", d.threshold);
  hp.lr_src_enc = j.value("lr_src_enc", d.lr_src_enc);
  hp.lr_tgt_enc = j.value("lr_tgt_enc", d.lr_tgt_enc);
  hp.lr_disc = j.value("lr_disc", d.lr_disc);
  hp.lr_clf = j.value("lr_clf", d.lr_clf);
  hp.lr_center = j.value("lr_center", d.lr_center);
  if (j.contains("betas")) {
    const auto& b = j.at("betas");
    if (!b.is_array() || b.size() != 2) throw FormatError("betas must be a two-element array");
    hp.beta1 = b[0].get<double>();
    hp.beta2 = b[1].get<double>();
  } else {
    hp.beta1 = d.beta1;
    hp.beta2 = d.beta2;
  }
  hp.batch_size = j.value("batch_size", d.batch_size);
  hp.adv_mode = adv_mode_from_string(j.value("adv_loss_mode", std::string(to_string(d.adv_mode))));
  hp.lca_enabled = j.value("lca_enabled", d.lca_enabled);
  hp.center_weight = j.value("center_weight", d.center_weight);
}

LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows) throw ShapeError("label count differs from logit rows");
  if (logits.rows == 0) throw ArgumentError("cross-entropy of an empty batch");
  LossAndGrad out;
  out.dlogits = Matrix(logits.rows, logits.cols);
  const Real inv_b = 1.0 / static_cast<Real>(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols)
      throw ArgumentError("label " + std::to_string(y) + " outside the classifier range");
    const auto row = logits.row(i);
    Real mx = row[0];
    for (Real v : row) mx = std::max(mx, v);
    Real s = 0;
    for (Real v : row) s += std::exp(v - mx);
    const Real log_z = mx + std::log(s);
    out.loss += (log_z - row[static_cast<std::size_t>(y)]) * inv_b;
    for (std::size_t k = 0; k < logits.cols; ++k) {
      const Real p = std::exp(row[k] - log_z);
      out.dlogits(i, k) = (p - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0)) * inv_b;
    }
  }
  return out;
}

void write_history(const std::vector<EpochLoss>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& h : history) out << json{{"epoch", h.epoch}, {"loss", h.loss}}.dump() << '\n';
}

namespace {

// One supervised step; returns the batch loss.
Real supervised_step(nets::Encoder& enc, nets::Classifier& clf, const dataio::Batch& batch,
                     nets::OptimState& enc_opt, nets::OptimState& clf_opt, std::mt19937_64& rng) {
  nets::EncoderTape tape;
  const Matrix f = enc.forward(batch.samples, nets::Mode::train, &rng, &tape);
  const auto out = clf.forward(f);
  auto lg = cross_entropy(out.logits, batch.labels);
  if (!std::isfinite(lg.loss)) throw NumericError("non-finite supervised loss");

  nets::NetParams clf_grads = clf.params().zeros_like();
  Matrix df;
  clf.backward(f, lg.dlogits, clf_grads, &df);
  nets::NetParams enc_grads = enc.params().zeros_like();
  enc.backward(tape, df, enc_grads);
  nets::adam_step(clf.params(), clf_grads, clf_opt);
  nets::adam_step(enc.params(), enc_grads, enc_opt);
  return lg.loss;
}

void require_trainable(const dataio::TimeSeriesDataset& ds, int num_classes, const char* what) {
  if (ds.size() == 0) throw ArgumentError(std::string(what) + " is empty");
  if (!ds.fully_labeled()) throw ArgumentError(std::string(what) + " must be fully labeled");
  for (int y : ds.labels)
    if (y >= num_classes) throw ArgumentError(std::string(what) + " has a label out of range");
}

}  // namespace

PretrainResult pretrain_source(const dataio::TimeSeriesDataset& source_train,
                               const TrainHyperparams& hp, const nets::EncoderConfig& config,
                               std::uint64_t seed) {
  hp.validate(source_train.num_classes);
  require_trainable(source_train, source_train.num_classes, "source training set");

  PretrainResult r{nets::Encoder(config, mix_seed(seed, 1)),
                   nets::Classifier(config.feature_dim, source_train.num_classes, mix_seed(seed, 2)),
                   {}};
  nets::OptimState enc_opt(r.encoder.params(), hp.adam(hp.lr_src_enc));
  nets::OptimState clf_opt(r.classifier.params(), hp.adam(hp.lr_clf));
  std::mt19937_64 rng(mix_seed(seed, 3));
  const std::uint64_t batch_seed = mix_seed(seed, 4);

  for (int epoch = 0; epoch < hp.epochs_pretrain; ++epoch) {
    Real total = 0;
    std::size_t seen = 0;
    for (const auto& batch : dataio::batch_iter(source_train, hp.batch_size, batch_seed,
                                                static_cast<std::uint64_t>(epoch))) {
      total += supervised_step(r.encoder, r.classifier, batch, enc_opt, clf_opt, rng) *
               static_cast<Real>(batch.labels.size());
      seen += batch.labels.size();
    }
    r.history.push_back({epoch + 1, total / static_cast<Real>(seen)});
  }
  return r;
}

std::vector<Real> finetune_target(nets::Encoder& target_encoder, nets::Classifier& classifier,
                                  const dataio::TimeSeriesDataset& labeled_target,
                                  const TrainHyperparams& hp, int passes, std::uint64_t seed) {
  if (labeled_target.size() == 0 || !labeled_target.has_labels())
    throw EmptyLabelSetError("no labeled target samples to fine-tune on");
  require_trainable(labeled_target, classifier.num_classes(), "labeled target set");
  if (passes < 0) throw ArgumentError("pass count must be non-negative");

  std::vector<Real> losses;
  if (passes == 0) return losses;
  nets::OptimState enc_opt(target_encoder.params(), hp.adam(hp.lr_tgt_enc));
  nets::OptimState clf_opt(classifier.params(), hp.adam(hp.lr_clf));
  std::mt19937_64 rng(mix_seed(seed, 11));
  const std::uint64_t batch_seed = mix_seed(seed, 12);
  for (int pass = 0; pass < passes; ++pass) {
    Real total = 0;
    std::size_t seen = 0;
    for (const auto& batch : dataio::batch_iter(labeled_target, hp.batch_size, batch_seed,
                                                static_cast<std::uint64_t>(pass))) {
      total += supervised_step(target_encoder, classifier, batch, enc_opt, clf_opt, rng) *
               static_cast<Real>(batch.labels.size());
      seen += batch.labels.size();
    }
    losses.push_back(total / static_cast<Real>(seen));
  }
  return losses;
}

Real evaluation_loss(const nets::Encoder& encoder, const nets::Classifier& classifier,
                     const dataio::TimeSeriesDataset& ds) {
  const Matrix f = encoder.infer(ds.samples);
  return cross_entropy(classifier.forward(f).logits, ds.labels).loss;
}

}  // namespace glada
