#pragma once

// Construction of the labeled target set: confidence-threshold seeding,
// graph label spreading over encoder features (the similarity-based
// classifier), deep-classifier prediction, and injection of the samples on
// which both predictors agree.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "glada/dataio.hpp"
#include "glada/label_state.hpp"
#include "glada/nets.hpp"
#include "glada/pretrain.hpp"

namespace glada::pseudolabel {

struct SbcConfig {
  std::size_t neighbors = 7;
  double alpha = 0.2;  // weight of propagated mass; 1 - alpha clamps to the seeds
  int max_iterations = 30;
  double tolerance = 1e-3;

  void validate() const;
};

void to_json(nlohmann::json& j, const SbcConfig& c);
void from_json(const nlohmann::json& j, SbcConfig& c);

// Sample i is labeled argmax p_i (provenance init-threshold) iff max p_i > tau.
PseudoLabelState threshold_labels(const Matrix& probabilities, double tau);

PseudoLabelState initial_threshold_labels(const nets::Encoder& encoder,
                                          const nets::Classifier& classifier,
                                          const dataio::TimeSeriesDataset& target_train,
                                          double tau);

struct SbcResult {
  std::vector<int> labels;       // one per feature row
  Matrix scores;                 // converged label distribution F
  std::vector<Real> max_change;  // per iteration
  int iterations = 0;
};

// Label spreading on a symmetric kNN graph with RBF weights whose bandwidth
// is the median kNN distance. Labeled rows are overwritten with their labels.
SbcResult sbc_fit_predict(const Matrix& features, const PseudoLabelState& state, int num_classes,
                          const SbcConfig& cfg);

std::vector<int> dnn_predict(const nets::Encoder& encoder, const nets::Classifier& classifier,
                             const Tensor3& samples);

// indices must be exactly state.unlabeled_indices(); y_sbc / y_dnn align with
// them. Returns the number of injected samples.
std::size_t agree_inject(PseudoLabelState& state, std::span<const std::size_t> indices,
                         std::span<const int> y_sbc, std::span<const int> y_dnn, int iteration);

struct AgreeIteration {
  int iteration = 0;
  std::size_t labeled_before = 0;
  std::size_t injected = 0;
  std::size_t labeled_after = 0;
  int sbc_iterations = 0;
  std::vector<Real> finetune_losses;
};

struct AgreeResult {
  PseudoLabelState state;
  std::vector<AgreeIteration> log;
};

// epochs_am rounds of [fine-tune on T_L, spread labels, predict, inject];
// samples still unlabeled afterwards are abandoned.
AgreeResult run_agree_mechanism(nets::Encoder& target_encoder, nets::Classifier& classifier,
                                const dataio::TimeSeriesDataset& target_train,
                                PseudoLabelState state, const TrainHyperparams& hp,
                                const SbcConfig& cfg, std::uint64_t seed);

// Line-delimited JSON audit, one record per target sample.
void write_audit(const PseudoLabelState& state, const std::filesystem::path& path);

}  // namespace glada::pseudolabel
