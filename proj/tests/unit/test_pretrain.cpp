#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "glada/dataio.hpp"
#include "glada/pretrain.hpp"

using namespace glada;

namespace {

dataio::TimeSeriesDataset synthetic_source(std::size_t per_class) {
  dataio::SynthSpec s;
  s.num_classes = 3;
  s.samples_per_class = per_class;
  s.channels = 2;
  s.length = 24;
  return dataio::make_synthetic_pair(s).first;
}

nets::EncoderConfig small_encoder() {
  nets::EncoderConfig c = nets::EncoderConfig::multivariate(2);
  c.mid_channels = 8;
  c.feature_dim = 16;
  return c;
}

Real train_accuracy(const nets::Encoder& e, const nets::Classifier& c,
                    const dataio::TimeSeriesDataset& ds) {
  const auto p = c.forward(e.infer(ds.samples)).probabilities;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    ok += static_cast<int>(argmax(p.row(i))) == ds.labels[i] ? 1 : 0;
  return static_cast<Real>(ok) / static_cast<Real>(ds.size());
}

}  // namespace

TEST(Pretrain, CrossEntropyMatchesScalarOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<Real> g(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + rng() % 9, k = 2 + rng() % 5;
    Matrix z(b, k);
    for (auto& v : z.data) v = g(rng);
    std::vector<int> y(b);
    for (auto& v : y) v = static_cast<int>(rng() % k);
    const auto lg = cross_entropy(z, y);
    Real oracle = 0;
    for (std::size_t i = 0; i < b; ++i) {
      Real mx = z(i, 0);
      for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z(i, j));
      Real s = 0;
      for (std::size_t j = 0; j < k; ++j) s += std::exp(z(i, j) - mx);
      oracle += -(z(i, static_cast<std::size_t>(y[i])) - mx - std::log(s));
    }
    EXPECT_NEAR(lg.loss, oracle / static_cast<Real>(b), 1e-9);
    // Gradient: (softmax - onehot) / b, rows sum to zero.
    for (std::size_t i = 0; i < b; ++i) {
      Real s = 0;
      for (std::size_t j = 0; j < k; ++j) s += lg.dlogits(i, j);
      EXPECT_NEAR(s, 0.0, 1e-12);
    }
  }
  Matrix z(1, 2);
  EXPECT_THROW(cross_entropy(z, std::vector<int>{2}), ArgumentError);
}

TEST(Pretrain, HyperparamDefaultsAndValidation) {
  TrainHyperparams hp;
  EXPECT_EQ(hp.epochs_pretrain, 40);
  EXPECT_EQ(hp.epochs_am, 3);
  EXPECT_EQ(hp.epochs_adapt, 50);
  EXPECT_DOUBLE_EQ(hp.threshold, 0.7);
  EXPECT_DOUBLE_EQ(hp.lr_src_enc, 1e-4);
  EXPECT_DOUBLE_EQ(hp.lr_tgt_enc, 5e-5);
  EXPECT_DOUBLE_EQ(hp.beta1, 0.5);
  EXPECT_DOUBLE_EQ(hp.beta2, 0.9);
  EXPECT_EQ(hp.batch_size, 32u);
  EXPECT_NO_THROW(hp.validate(6));
  EXPECT_THROW(hp.validate(1), ArgumentError);
  hp.threshold = 0.2;
  EXPECT_THROW(hp.validate(4), ArgumentError);
  hp = TrainHyperparams{};
  hp.lr_disc = 0;
  EXPECT_THROW(hp.validate(2), ArgumentError);
  hp = TrainHyperparams{};
  hp.adv_mode = AdvLossMode::literal;
  hp.lca_enabled = false;
  const auto back = nlohmann::json(hp).get<TrainHyperparams>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(hp));
  EXPECT_EQ(adv_mode_from_string("shared-half"), AdvLossMode::shared_half);
  EXPECT_THROW(adv_mode_from_string("other"), ArgumentError);
}

TEST(Pretrain, SeparableSourceIsLearnedAndLossFalls) {
  const auto src = synthetic_source(40);
  TrainHyperparams hp;
  hp.epochs_pretrain = 40;
  hp.lr_src_enc = 1e-3;
  const auto r = pretrain_source(src, hp, small_encoder(), 1);
  ASSERT_EQ(r.history.size(), 40u);
  EXPECT_LT(r.history.back().loss, r.history.front().loss);
  EXPECT_GE(train_accuracy(r.encoder, r.classifier, src), 0.99);
}

TEST(Pretrain, IsDeterministic) {
  const auto src = synthetic_source(10);
  TrainHyperparams hp;
  hp.epochs_pretrain = 3;
  const auto a = pretrain_source(src, hp, small_encoder(), 5);
  const auto b = pretrain_source(src, hp, small_encoder(), 5);
  EXPECT_EQ(a.encoder.params(), b.encoder.params());
  EXPECT_EQ(a.classifier.params(), b.classifier.params());
  const auto c = pretrain_source(src, hp, small_encoder(), 6);
  EXPECT_NE(a.encoder.params(), c.encoder.params());
}

TEST(Pretrain, RejectsBadInputs) {
  TrainHyperparams hp;
  hp.epochs_pretrain = 1;
  auto src = synthetic_source(5);
  auto one_class = src;
  one_class.num_classes = 1;
  for (auto& y : one_class.labels) y = 0;
  EXPECT_THROW(pretrain_source(one_class, hp, small_encoder(), 1), ArgumentError);
  auto partial = src;
  partial.labels[0] = -1;
  EXPECT_THROW(pretrain_source(partial, hp, small_encoder(), 1), ArgumentError);
  dataio::TimeSeriesDataset empty;
  empty.num_classes = 3;
  EXPECT_THROW(pretrain_source(empty, hp, small_encoder(), 1), Error);
}

TEST(Pretrain, FinetuneReducesLossAndZeroPassesIsIdentity) {
  const auto src = synthetic_source(20);
  TrainHyperparams hp;
  hp.epochs_pretrain = 2;
  auto r = pretrain_source(src, hp, small_encoder(), 2);
  nets::Encoder tgt = nets::init_target_from_source(r.encoder);
  nets::Classifier clf = r.classifier;

  const auto before_e = tgt.params();
  const auto before_c = clf.params();
  EXPECT_TRUE(finetune_target(tgt, clf, src, hp, 0, 1).empty());
  EXPECT_EQ(tgt.params(), before_e);
  EXPECT_EQ(clf.params(), before_c);

  const Real loss0 = evaluation_loss(tgt, clf, src);
  hp.lr_tgt_enc = 1e-3;
  const auto losses = finetune_target(tgt, clf, src, hp, 15, 1);
  EXPECT_EQ(losses.size(), 15u);
  EXPECT_LT(evaluation_loss(tgt, clf, src), loss0);
  EXPECT_LT(losses.back(), losses.front());

  dataio::TimeSeriesDataset empty;
  empty.num_classes = 3;
  EXPECT_THROW(finetune_target(tgt, clf, empty, hp, 1, 1), EmptyLabelSetError);
}
