#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "glada/dataio.hpp"
#include "glada/nets.hpp"
#include "glada/optim.hpp"

namespace glada {

// How the adversarial objective is realized.
//   shared_half: discriminator separates domains with 0/1 targets, encoders push it to 0.5
//   literal:     the printed log(0.5 - D) / log(D - 0.5) objective, clamped at 1e-6
enum class AdvLossMode { shared_half, literal };

std::string_view to_string(AdvLossMode m);
AdvLossMode adv_mode_from_string(std::string_view s);

struct TrainHyperparams {
  int epochs_pretrain = 40;
  int epochs_am = 3;
  int epochs_adapt = 50;
  int epochs_shared_classifier = 40;
  int finetune_passes = 1;  // passes over T_L per agree-mechanism iteration
  double threshold = 0.7;
  double lr_src_enc = 1e-4;
  double lr_tgt_enc = 5e-5;
  double lr_disc = 1e-3;
  double lr_clf = 1e-3;
  double lr_center = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::size_t batch_size = 32;
  AdvLossMode adv_mode = AdvLossMode::shared_half;
  bool lca_enabled = true;
  double center_weight = 1.0;

  nets::AdamSettings adam(double lr) const { return {lr, beta1, beta2, 1e-8}; }
  // Throws ArgumentError; the threshold must lie in (1/K, 1).
  void validate(int num_classes) const;
};

void to_json(nlohmann::json& j, const TrainHyperparams& hp);
void from_json(const nlohmann::json& j, TrainHyperparams& hp);

// T_L is empty: threshold initialization produced no labels.
class EmptyLabelSetError : public Error {
 public:
  using Error::Error;
};

struct LossAndGrad {
  Real loss = 0;  // mean over the batch
  Matrix dlogits;
};

// Mean cross-entropy of softmax(logits) against integer labels, with its logit gradient.
LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels);

struct EpochLoss {
  int epoch = 0;
  Real loss = 0;
};

void write_history(const std::vector<EpochLoss>& history, const std::filesystem::path& path);

struct PretrainResult {
  nets::Encoder encoder;
  nets::Classifier classifier;
  std::vector<EpochLoss> history;
};

// Supervised source training: encoder at lr_src_enc, classifier at lr_clf.
PretrainResult pretrain_source(const dataio::TimeSeriesDataset& source_train,
                               const TrainHyperparams& hp, const nets::EncoderConfig& config,
                               std::uint64_t seed);

// Supervised passes over the labeled target subset only; encoder at
// lr_tgt_enc, classifier at lr_clf. Returns the mean loss of every pass.
// Zero passes leaves both networks untouched.
std::vector<Real> finetune_target(nets::Encoder& target_encoder, nets::Classifier& classifier,
                                  const dataio::TimeSeriesDataset& labeled_target,
                                  const TrainHyperparams& hp, int passes, std::uint64_t seed);

// Mean cross-entropy of classifier(encoder(x)) in eval mode.
Real evaluation_loss(const nets::Encoder& encoder, const nets::Classifier& classifier,
                     const dataio::TimeSeriesDataset& ds);

}  // namespace glada
