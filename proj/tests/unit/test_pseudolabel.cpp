#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "glada/pretrain.hpp"
#include "glada/pseudolabel.hpp"

using namespace glada;
using namespace glada::pseudolabel;
namespace fs = std::filesystem;

namespace {

Matrix two_clusters(std::size_t per, std::uint64_t seed, Real gap = 20) {
  Matrix f(2 * per, 3);
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> g;
  for (std::size_t i = 0; i < 2 * per; ++i)
    for (std::size_t d = 0; d < 3; ++d) f(i, d) = g(rng) + (i < per ? 0 : gap);
  return f;
}

// Dense label spreading written from the definition: brute-force kNN,
// RBF weights at the median kNN distance, closed-form fixed point
// F* = (1 - alpha) (I - alpha S)^-1 Y0 by Gaussian elimination.
Matrix closed_form_scores(const Matrix& x, const PseudoLabelState& st, int K, const SbcConfig& cfg) {
  const std::size_t n = x.rows;
  auto d2 = [&](std::size_t i, std::size_t j) {
    Real s = 0;
    for (std::size_t d = 0; d < x.cols; ++d) s += (x(i, d) - x(j, d)) * (x(i, d) - x(j, d));
    return s;
  };
  const std::size_t k = std::min(cfg.neighbors, n - 1);
  std::vector<std::vector<bool>> edge(n, std::vector<bool>(n, false));
  std::vector<Real> dists;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<Real, std::size_t>> order;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.emplace_back(d2(i, j), j);
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < k; ++r) {
      edge[i][order[r].second] = edge[order[r].second][i] = true;
      dists.push_back(std::sqrt(order[r].first));
    }
  }
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  const Real sigma = m % 2 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  std::vector<std::vector<Real>> w(n, std::vector<Real>(n, 0));
  std::vector<Real> deg(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (edge[i][j]) {
        w[i][j] = sigma > 0 ? std::exp(-d2(i, j) / (2 * sigma * sigma)) : 1.0;
        deg[i] += w[i][j];
      }
  // A = I - alpha S, rhs = (1 - alpha) Y0
  std::vector<std::vector<Real>> a(n, std::vector<Real>(n + static_cast<std::size_t>(K), 0));
  for (std::size_t i = 0; i < n; ++i) {
    a[i][i] = 1;
    for (std::size_t j = 0; j < n; ++j)
      if (edge[i][j]) a[i][j] -= cfg.alpha * w[i][j] / std::sqrt(deg[i] * deg[j]);
    if (st[i].labeled()) a[i][n + static_cast<std::size_t>(st[i].label)] = 1 - cfg.alpha;
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const Real factor = a[r][c] / a[c][c];
      for (std::size_t j = c; j < a[r].size(); ++j) a[r][j] -= factor * a[c][j];
    }
  }
  Matrix out(n, static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < K; ++c) out(i, static_cast<std::size_t>(c)) = a[i][n + static_cast<std::size_t>(c)] / a[i][i];
  return out;
}

}  // namespace

TEST(Pseudolabel, ThresholdHandCase) {
  Matrix p(2, 2);
  p.data = {0.9, 0.1, 0.55, 0.45};
  const auto st = threshold_labels(p, 0.7);
  EXPECT_EQ(st[0].label, 0);
  EXPECT_EQ(st[0].provenance, Provenance::init_threshold);
  EXPECT_EQ(st[1].provenance, Provenance::unlabeled);
  EXPECT_EQ(st[1].label, -1);
  EXPECT_EQ(threshold_labels(p, 0.9).labeled_count(), 0u);  // strict inequality
}

TEST(Pseudolabel, ThresholdFractionIsMonotoneInTau) {
  std::mt19937_64 rng(4);
  Matrix logits(300, 4);
  std::normal_distribution<Real> g(0, 2);
  for (auto& v : logits.data) v = g(rng);
  const Matrix p = nets::softmax_rows(logits);
  std::size_t prev = p.rows + 1;
  for (double tau = 0.26; tau < 1.0; tau += 0.02) {
    const std::size_t n = threshold_labels(p, tau).labeled_count();
    EXPECT_LE(n, prev);
    prev = n;
  }
  EXPECT_LE(threshold_labels(p, 0.99999).labeled_count(), 5u);
}

TEST(Pseudolabel, SbcTwoClustersFollowNearestSeed) {
  const Matrix f = two_clusters(20, 1);
  PseudoLabelState st(f.rows);
  st.set_given(3, 1);
  st.set_given(27, 0);
  const auto r = sbc_fit_predict(f, st, 2, SbcConfig{});
  for (std::size_t i = 0; i < f.rows; ++i) EXPECT_EQ(r.labels[i], i < 20 ? 1 : 0) << i;
  EXPECT_GE(r.iterations, 1);
  EXPECT_LE(r.iterations, SbcConfig{}.max_iterations);
  EXPECT_EQ(r.max_change.size(), static_cast<std::size_t>(r.iterations));
  for (Real c : r.max_change) EXPECT_TRUE(std::isfinite(c));
}

TEST(Pseudolabel, SbcAllLabeledReturnsLabels) {
  const Matrix f = two_clusters(6, 2);
  PseudoLabelState st(f.rows);
  std::vector<int> y;
  for (std::size_t i = 0; i < f.rows; ++i) {
    y.push_back(static_cast<int>((i * 7) % 3));
    st.set_threshold(i, y.back());
  }
  EXPECT_EQ(sbc_fit_predict(f, st, 3, SbcConfig{}).labels, y);
}

TEST(Pseudolabel, SbcMatchesClosedForm) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix f = two_clusters(15, 10 + trial, 3.0);
    PseudoLabelState st(f.rows);
    for (std::size_t i = 0; i < f.rows; ++i)
      if (rng() % 4 == 0) st.set_given(i, static_cast<int>(rng() % 3));
    if (st.labeled_count() == 0) st.set_given(0, 0);
    SbcConfig cfg;
    cfg.tolerance = 1e-14;
    cfg.max_iterations = 1000;
    const auto r = sbc_fit_predict(f, st, 3, cfg);
    const Matrix oracle = closed_form_scores(f, st, 3, cfg);
    for (std::size_t i = 0; i < oracle.data.size(); ++i)
      EXPECT_NEAR(r.scores.data[i], oracle.data[i], 1e-10);
  }
}

TEST(Pseudolabel, SbcDuplicatedPointsKeepOriginalLabels) {
  const Matrix base = two_clusters(10, 3, 6.0);
  PseudoLabelState st(base.rows);
  st.set_given(0, 0);
  st.set_given(15, 1);
  const auto single = sbc_fit_predict(base, st, 2, SbcConfig{});

  Matrix doubled(2 * base.rows, base.cols);
  for (std::size_t i = 0; i < base.rows; ++i)
    for (std::size_t d = 0; d < base.cols; ++d) doubled(i, d) = doubled(i + base.rows, d) = base(i, d);
  PseudoLabelState st2(doubled.rows);
  st2.set_given(0, 0);
  st2.set_given(15, 1);
  SbcConfig cfg;
  const auto r = sbc_fit_predict(doubled, st2, 2, cfg);
  cfg.tolerance = 1e-14;
  cfg.max_iterations = 1000;
  const Matrix oracle = closed_form_scores(doubled, st2, 2, cfg);
  for (std::size_t i = 0; i < base.rows; ++i) {
    EXPECT_EQ(r.labels[i + base.rows], r.labels[i]) << i;
    EXPECT_EQ(r.labels[i], single.labels[i]) << i;
    EXPECT_EQ(static_cast<std::size_t>(r.labels[i]), argmax(oracle.row(i)));
  }
}

TEST(Pseudolabel, SbcIdenticalFeaturesUseUniformWeights) {
  Matrix f(6, 2, 1.5);
  PseudoLabelState st(6);
  st.set_given(0, 1);
  const auto r = sbc_fit_predict(f, st, 2, SbcConfig{});
  for (int y : r.labels) EXPECT_EQ(y, 1);
  EXPECT_TRUE(all_finite(r.scores.data));
}

TEST(Pseudolabel, SbcErrors) {
  const Matrix f = two_clusters(4, 1);
  EXPECT_THROW(sbc_fit_predict(f, PseudoLabelState(f.rows), 2, SbcConfig{}), ArgumentError);
  EXPECT_THROW(sbc_fit_predict(f, PseudoLabelState(3), 2, SbcConfig{}), ShapeError);
  SbcConfig bad;
  bad.alpha = 1.0;
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = SbcConfig{};
  bad.neighbors = 0;
  EXPECT_THROW(bad.validate(), ArgumentError);
  const SbcConfig d;
  EXPECT_EQ(d.neighbors, 7u);
  EXPECT_DOUBLE_EQ(d.alpha, 0.2);
  EXPECT_EQ(d.max_iterations, 30);
  EXPECT_DOUBLE_EQ(d.tolerance, 1e-3);
}

TEST(Pseudolabel, AgreeInjectHandCase) {
  PseudoLabelState st(5);
  st.set_given(1, 2);
  st.set_threshold(3, 0);
  const auto idx = st.unlabeled_indices();  // 0, 2, 4
  ASSERT_EQ(idx.size(), 3u);
  const std::vector<int> sbc{1, 2, 0}, dnn{1, 0, 0};
  EXPECT_EQ(agree_inject(st, idx, sbc, dnn, 1), 2u);
  EXPECT_EQ(st[0].label, 1);
  EXPECT_EQ(st[0].provenance, Provenance::agreed);
  EXPECT_EQ(st[0].iteration, 1);
  EXPECT_EQ(st[2].provenance, Provenance::unlabeled);
  EXPECT_EQ(st[4].label, 0);
  EXPECT_EQ(st[4].y_sbc, 0);
  EXPECT_EQ(st[4].y_dnn, 0);
  EXPECT_EQ(st[1].label, 2);
  EXPECT_EQ(st[3].provenance, Provenance::init_threshold);
}

TEST(Pseudolabel, AgreeInjectEdgeCases) {
  PseudoLabelState st(3);
  const auto idx = st.unlabeled_indices();
  PseudoLabelState none = st;
  EXPECT_EQ(agree_inject(none, idx, std::vector<int>{0, 1, 0}, std::vector<int>{1, 0, 1}, 1), 0u);
  EXPECT_EQ(none, st);
  EXPECT_EQ(agree_inject(st, idx, std::vector<int>{0, 1, 0}, std::vector<int>{0, 1, 0}, 1), 3u);
  EXPECT_EQ(st.unlabeled_count(), 0u);

  PseudoLabelState cov(3);
  const std::vector<std::size_t> partial{0, 1};
  EXPECT_THROW(agree_inject(cov, partial, std::vector<int>{0, 0}, std::vector<int>{0, 0}, 1),
               ArgumentError);
}

TEST(Pseudolabel, LabelStateInvariants) {
  PseudoLabelState st(4);
  st.set_given(0, 1);
  EXPECT_THROW(st.set_threshold(0, 0), ArgumentError);
  EXPECT_THROW(st.set_agreed(0, 0, 1, 0, 0), ArgumentError);
  EXPECT_THROW(st.set_given(9, 0), ArgumentError);
  st.set_threshold(1, 0);
  st.abandon_unlabeled();
  EXPECT_EQ(st.abandoned_count(), 2u);
  EXPECT_EQ(st.labeled_count() + st.unlabeled_count() + st.abandoned_count(), st.size());
  EXPECT_EQ(st.labels(), (std::vector<int>{1, 0, -1, -1}));
  EXPECT_NO_THROW(st.validate(2));
  EXPECT_THROW(st.validate(1), ArgumentError);
}

TEST(Pseudolabel, AgreeMechanismProperties) {
  dataio::SynthSpec s;
  s.num_classes = 3;
  s.samples_per_class = 30;
  s.channels = 2;
  s.length = 24;
  s.noise_std = 0.3;
  const auto [src, tgt] = dataio::make_synthetic_pair(s);
  nets::EncoderConfig ec = nets::EncoderConfig::multivariate(2);
  ec.mid_channels = 8;
  ec.feature_dim = 16;
  TrainHyperparams hp;
  hp.epochs_pretrain = 5;
  auto pre = pretrain_source(src, hp, ec, 1);
  nets::Encoder mt = nets::init_target_from_source(pre.encoder);
  nets::Classifier clf = pre.classifier;
  const PseudoLabelState st0 = dataio::stratified_label_mask(tgt, 0.1, 2);
  const auto res = run_agree_mechanism(mt, clf, tgt, st0, hp, SbcConfig{}, 3);

  ASSERT_EQ(res.log.size(), 3u);
  std::size_t prev = st0.labeled_count();
  for (const auto& it : res.log) {
    EXPECT_EQ(it.labeled_before, prev);
    EXPECT_EQ(it.labeled_after, it.labeled_before + it.injected);
    EXPECT_GE(it.labeled_after, it.labeled_before);
    prev = it.labeled_after;
  }
  for (std::size_t i = 0; i < st0.size(); ++i) {
    const auto& e = res.state[i];
    if (st0[i].provenance == Provenance::given) {
      EXPECT_EQ(e, st0[i]);
    }
    if (e.provenance == Provenance::agreed) {
      EXPECT_EQ(e.label, e.y_sbc);
      EXPECT_EQ(e.label, e.y_dnn);
      EXPECT_GE(e.iteration, 1);
    }
    EXPECT_NE(e.provenance, Provenance::unlabeled);
  }
  EXPECT_EQ(res.state.abandoned_count(), st0.size() - prev);

  EXPECT_THROW(run_agree_mechanism(mt, clf, tgt, PseudoLabelState(tgt.size()), hp, SbcConfig{}, 3),
               EmptyLabelSetError);
}

TEST(Pseudolabel, DnnPredictIsDeterministic) {
  nets::EncoderConfig ec = nets::EncoderConfig::multivariate(2);
  ec.mid_channels = 4;
  ec.feature_dim = 8;
  const nets::Encoder e(ec, 1);
  const nets::Classifier c(8, 3, 2);
  Tensor3 x(7, 2, 16);
  std::mt19937_64 rng(1);
  std::normal_distribution<Real> g;
  for (auto& v : x.data) v = g(rng);
  const auto a = dnn_predict(e, c, x);
  EXPECT_EQ(a.size(), 7u);
  EXPECT_EQ(a, dnn_predict(e, c, x));
}

TEST(Pseudolabel, AuditFile) {
  PseudoLabelState st(3);
  st.set_given(0, 1);
  st.set_agreed(1, 0, 2, 0, 0);
  const fs::path p = fs::temp_directory_path() / "glada_test_audit.jsonl";
  write_audit(st, p);
  std::ifstream in(p);
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["provenance"], "given");
  EXPECT_EQ(rows[1]["iteration"], 2);
  EXPECT_EQ(rows[1]["y_sbc"], 0);
  EXPECT_EQ(rows[2]["label"], -1);
  EXPECT_EQ(rows[2]["index"], 2);
}
