#include "glada/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "glada/kernels.hpp"

namespace glada::pseudolabel {

using nlohmann::json;

void SbcConfig::validate() const {
  if (neighbors < 1) throw ArgumentError("label spreading needs at least one neighbor");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("label spreading alpha must lie in (0, 1)");
  if (max_iterations < 1) throw ArgumentError("label spreading needs at least one iteration");
  if (!(tolerance > 0.0)) throw ArgumentError("label spreading tolerance must be positive");
}

void to_json(json& j, const SbcConfig& c) {
  j = json{{"neighbors", c.neighbors},
           {"alpha", c.alpha},
           {"max_iterations", c.max_iterations},
           {"tolerance", c.tolerance}};
}

void from_json(const json& j, SbcConfig& c) {
  const SbcConfig d;
  c.neighbors = j.value("neighbors", d.neighbors);
  c.alpha = j.value("alpha", d.alpha);
  c.max_iterations = j.value("max_iterations", d.max_iterations);
  c.tolerance = j.value("tolerance", d.tolerance);
}

PseudoLabelState threshold_labels(const Matrix& probabilities, double tau) {
  PseudoLabelState state(probabilities.rows);
  for (std::size_t i = 0; i < probabilities.rows; ++i) {
    const auto row = probabilities.row(i);
    const std::size_t k = argmax(row);
    if (row[k] > tau) state.set_threshold(i, static_cast<int>(k));
  }
  return state;
}

PseudoLabelState initial_threshold_labels(const nets::Encoder& encoder,
                                          const nets::Classifier& classifier,
                                          const dataio::TimeSeriesDataset& target_train,
                                          double tau) {
  const Matrix f = encoder.infer(target_train.samples);
  return threshold_labels(classifier.forward(f).probabilities, tau);
}

SbcResult sbc_fit_predict(const Matrix& features, const PseudoLabelState& state, int num_classes,
                          const SbcConfig& cfg) {
  cfg.validate();
  const std::size_t n = features.rows;
  if (state.size() != n) throw ShapeError("label state size differs from feature rows");
  if (num_classes < 2) throw ArgumentError("label spreading needs at least two classes");
  const auto k_cls = static_cast<std::size_t>(num_classes);
  const auto seeds = state.labeled_indices();
  if (seeds.empty()) throw ArgumentError("label spreading needs at least one labeled sample");
  if (!all_finite(features.data)) throw NumericError("label spreading features are not finite");

  // kNN lists, ties broken by index.
  std::vector<Real> dist2(n * n);
  kernels::parallel::pairwise_sq_distances(n, features.cols, features.data, dist2);
  const std::size_t k = std::min(cfg.neighbors, n - 1);
  std::vector<std::vector<std::size_t>> knn(n);
  std::vector<Real> knn_dist;
  knn_dist.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    const auto closer = [&](std::size_t a, std::size_t b) {
      const Real da = dist2[i * n + a], db = dist2[i * n + b];
      return da < db || (da == db && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      closer);
    knn[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto j : knn[i]) knn_dist.push_back(std::sqrt(dist2[i * n + j]));
  }

  Real sigma = 0;
  if (!knn_dist.empty()) {
    auto mid = knn_dist.begin() + static_cast<std::ptrdiff_t>(knn_dist.size() / 2);
    std::nth_element(knn_dist.begin(), mid, knn_dist.end());
    sigma = *mid;
    if (knn_dist.size() % 2 == 0) {
      const Real lower = *std::max_element(knn_dist.begin(), mid);
      sigma = 0.5 * (sigma + lower);
    }
  }
  const auto weight = [&](std::size_t i, std::size_t j) {
    if (sigma <= 0) return Real{1};  // all features identical
    return std::exp(-dist2[i * n + j] / (2 * sigma * sigma));
  };

  // Symmetric adjacency: edge if either endpoint lists the other.
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : knn[i]) {
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  std::vector<Real> degree(n, 0);
  std::vector<std::vector<std::pair<std::size_t, Real>>> graph(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(adj[i].begin(), adj[i].end());
    adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
    for (auto j : adj[i]) {
      const Real w = weight(i, j);
      graph[i].emplace_back(j, w);
      degree[i] += w;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& [j, w] : graph[i]) {
      const Real denom = std::sqrt(degree[i] * degree[j]);
      w = denom > 0 ? w / denom : 0;
    }
  }

  Matrix seed_dist(n, k_cls);
  for (auto i : seeds) {
    const int y = state[i].label;
    if (y >= num_classes) throw ArgumentError("seed label outside the class range");
    seed_dist(i, static_cast<std::size_t>(y)) = 1;
  }

  SbcResult result;
  Matrix f = seed_dist;
  Matrix next(n, k_cls);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    Real change = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k_cls; ++c) {
        Real s = 0;
        for (const auto& [j, w] : graph[i]) s += w * f(j, c);
        next(i, c) = cfg.alpha * s + (1 - cfg.alpha) * seed_dist(i, c);
        change = std::max(change, std::abs(next(i, c) - f(i, c)));
      }
    }
    std::swap(f, next);
    result.max_change.push_back(change);
    result.iterations = it + 1;
    if (change < cfg.tolerance) break;
  }

  result.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.labels[i] = static_cast<int>(argmax(f.row(i)));
  for (auto i : seeds) result.labels[i] = state[i].label;
  result.scores = std::move(f);
  return result;
}

std::vector<int> dnn_predict(const nets::Encoder& encoder, const nets::Classifier& classifier,
                             const Tensor3& samples) {
  std::vector<int> out;
  if (samples.d0 == 0) return out;
  const auto probs = classifier.forward(encoder.infer(samples)).probabilities;
  out.reserve(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) out.push_back(static_cast<int>(argmax(probs.row(i))));
  return out;
}

std::size_t agree_inject(PseudoLabelState& state, std::span<const std::size_t> indices,
                         std::span<const int> y_sbc, std::span<const int> y_dnn, int iteration) {
  const auto expected = state.unlabeled_indices();
  if (indices.size() != expected.size() || !std::equal(indices.begin(), indices.end(), expected.begin()))
    throw ArgumentError("agreement predictions must cover exactly the unlabeled samples");
  if (y_sbc.size() != indices.size() || y_dnn.size() != indices.size())
    throw ShapeError("prediction vectors must align with the unlabeled indices");
  std::size_t injected = 0;
  for (std::size_t u = 0; u < indices.size(); ++u) {
    if (y_sbc[u] == y_dnn[u]) {
      state.set_agreed(indices[u], y_sbc[u], iteration, y_sbc[u], y_dnn[u]);
      ++injected;
    }
  }
  return injected;
}

AgreeResult run_agree_mechanism(nets::Encoder& target_encoder, nets::Classifier& classifier,
                                const dataio::TimeSeriesDataset& target_train,
                                PseudoLabelState state, const TrainHyperparams& hp,
                                const SbcConfig& cfg, std::uint64_t seed) {
  if (state.size() != target_train.size())
    throw ShapeError("label state size differs from the target training set");
  if (state.labeled_count() == 0)
    throw EmptyLabelSetError("agree mechanism needs at least one labeled target sample");

  AgreeResult result;
  for (int it = 0; it < hp.epochs_am; ++it) {
    AgreeIteration rec;
    rec.iteration = it + 1;
    rec.labeled_before = state.labeled_count();

    // Fine-tuning sees the labeled subset only.
    const auto labeled = state.labeled_indices();
    dataio::TimeSeriesDataset tl = target_train.subset(labeled);
    tl.labels.clear();
    for (auto i : labeled) tl.labels.push_back(state[i].label);
    rec.finetune_losses = finetune_target(target_encoder, classifier, tl, hp, hp.finetune_passes,
                                          mix_seed(seed, static_cast<std::uint64_t>(it)));

    const auto unlabeled = state.unlabeled_indices();
    if (!unlabeled.empty()) {
      const Matrix feats = target_encoder.infer(target_train.samples);
      const auto sbc = sbc_fit_predict(feats, state, target_train.num_classes, cfg);
      rec.sbc_iterations = sbc.iterations;
      std::vector<int> y_sbc;
      y_sbc.reserve(unlabeled.size());
      for (auto i : unlabeled) y_sbc.push_back(sbc.labels[i]);
      const auto y_dnn =
          dnn_predict(target_encoder, classifier, target_train.subset(unlabeled).samples);
      rec.injected = agree_inject(state, unlabeled, y_sbc, y_dnn, it + 1);
    }
    rec.labeled_after = state.labeled_count();
    result.log.push_back(std::move(rec));
  }
  state.abandon_unlabeled();
  result.state = std::move(state);
  return result;
}

void write_audit(const PseudoLabelState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& e = state[i];
    json rec{{"index", i},
             {"label", e.label},
             {"provenance", to_string(e.provenance)},
             {"iteration", e.iteration},
             {"y_sbc", e.y_sbc},
             {"y_dnn", e.y_dnn}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace glada::pseudolabel
