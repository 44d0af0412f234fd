#pragma once

// Global feature alignment (adversarial, into a shared intermediate space),
// local class alignment (center loss against one bank shared by both
// domains), and the shared classifier trained on frozen embeddings.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "glada/dataio.hpp"
#include "glada/nets.hpp"
#include "glada/pretrain.hpp"

namespace glada::align {

struct CenterBank {
  Matrix centers;  // [K][feature_dim]

  std::size_t num_classes() const { return centers.rows; }
  std::size_t dim() const { return centers.cols; }
  // Throws NumericError / ShapeError.
  void validate(std::size_t num_classes) const;

  bool operator==(const CenterBank&) const = default;
};

// Per-class mean of eval-mode encoder features. A class with no sample takes
// the mean over all samples.
CenterBank init_center_bank(const nets::Encoder& encoder, const dataio::TimeSeriesDataset& ds);
CenterBank init_center_bank(const Matrix& features, std::span<const int> labels, int num_classes);

// Probability-space losses; inputs must lie strictly inside (0, 1).
Real discriminator_loss(std::span<const Real> d_src, std::span<const Real> d_tgt, AdvLossMode mode);
Real encoder_adv_loss(std::span<const Real> d, AdvLossMode mode);

// The same losses evaluated from discriminator logits, stable for saturated
// outputs, with gradients with respect to those logits.
struct DiscLossGrad {
  Real loss = 0;
  std::vector<Real> dlogits_src;
  std::vector<Real> dlogits_tgt;
};
DiscLossGrad discriminator_loss_logits(std::span<const Real> z_src, std::span<const Real> z_tgt,
                                       AdvLossMode mode);

struct EncLossGrad {
  Real loss = 0;
  std::vector<Real> dlogits;
};
EncLossGrad encoder_adv_loss_logits(std::span<const Real> z, AdvLossMode mode);

// 1/2 sum_i ||f_i - c_{y_i}||^2 over the batch.
Real center_loss(const Matrix& features, std::span<const int> labels, const CenterBank& bank);
// Row i: f_i - c_{y_i}.
Matrix center_grad(const Matrix& features, std::span<const int> labels, const CenterBank& bank);
// Damped update: c_j -= lr * sum_{y_i=j}(c_j - f_i) / (1 + n_j); absent classes keep their center.
void center_update(const Matrix& features, std::span<const int> labels, CenterBank& bank,
                   double lr_center);

struct AdvBatchLosses {
  Real loss_disc = 0;
  Real loss_enc_src = 0;
  Real loss_enc_tgt = 0;
  Real loss_center = 0;
  Real mean_d_src = 0;
  Real mean_d_tgt = 0;

  bool finite() const;
};

struct EpochMetrics {
  int epoch = 0;
  AdvBatchLosses losses;  // means over the epoch's batch pairs
};

void write_metrics(const std::vector<EpochMetrics>& history, const std::filesystem::path& path);

struct AdaptResult {
  CenterBank bank;
  std::vector<EpochMetrics> history;
};

// epochs_adapt epochs over min(#source batches, #target batches) pairs:
// discriminator step, then an encoder step against the updated
// discriminator (plus center terms), then center updates on the pooled pair.
// target_labeled must be fully labeled with pseudo-labels.
AdaptResult adapt(nets::Encoder& source_encoder, nets::Encoder& target_encoder,
                  nets::Discriminator& discriminator, const dataio::TimeSeriesDataset& source_train,
                  const dataio::TimeSeriesDataset& target_labeled, CenterBank bank,
                  const TrainHyperparams& hp, std::uint64_t seed);

// Fresh classifier on frozen eval-mode embeddings: per batch pair the loss is
// CE(source) + CE(target). Runs epochs_shared_classifier epochs at lr_clf.
nets::Classifier train_shared_classifier(const nets::Encoder& source_encoder,
                                         const nets::Encoder& target_encoder,
                                         const dataio::TimeSeriesDataset& source_train,
                                         const dataio::TimeSeriesDataset& target_labeled,
                                         const TrainHyperparams& hp, std::uint64_t seed);

struct DomainOutputs {
  Real mean_d_src = 0;
  Real mean_d_tgt = 0;
};

DomainOutputs mean_discriminator_outputs(const nets::Discriminator& discriminator,
                                         const Matrix& source_features,
                                         const Matrix& target_features);

// Trains a discriminator alone (encoders untouched) on the given training
// features for `epochs` epochs at lr_disc, then reports its held-out outputs.
DomainOutputs probe_discriminator(const Matrix& source_train, const Matrix& target_train,
                                  const Matrix& source_heldout, const Matrix& target_heldout,
                                  const TrainHyperparams& hp, int epochs, std::uint64_t seed);

// Mean Euclidean distance of each row to the mean of its class.
Real within_class_distance(const Matrix& features, std::span<const int> labels, int num_classes);

}  // namespace glada::align
