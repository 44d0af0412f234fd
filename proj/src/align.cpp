#include "glada/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "glada/optim.hpp"

namespace glada::align {

using nlohmann::json;

namespace {

constexpr Real kLiteralClamp = 1e-6;

// log(1 + e^x) without overflow.
Real softplus(Real x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_probabilities(std::span<const Real> d, const char* what) {
  if (d.empty()) throw ArgumentError(std::string(what) + " is empty");
  for (Real v : d)
    if (!(v > 0 && v < 1))
      throw ArgumentError(std::string(what) + " must lie strictly inside (0, 1)");
}

Real mean(std::span<const Real> v) {
  Real s = 0;
  for (Real x : v) s += x;
  return s / static_cast<Real>(v.size());
}

void check_labels(const Matrix& f, std::span<const int> labels, const CenterBank& bank) {
  if (labels.size() != f.rows) throw ShapeError("center loss: label count differs from feature rows");
  if (f.cols != bank.dim()) throw ShapeError("center loss: feature width differs from the bank");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= bank.num_classes())
      throw ArgumentError("center loss: label " + std::to_string(y) + " out of range");
}

[[noreturn]] void non_finite(const char* what, AdvLossMode mode) {
  throw NumericError(std::string("non-finite ") + what + " during adaptation (adversarial mode " +
                     std::string(to_string(mode)) + ")");
}

}  // namespace

void CenterBank::validate(std::size_t k) const {
  if (centers.rows != k) throw ShapeError("center bank must hold exactly one row per class");
  if (!all_finite(centers.data)) throw NumericError("center bank holds non-finite values");
}

CenterBank init_center_bank(const Matrix& features, std::span<const int> labels, int num_classes) {
  if (labels.size() != features.rows) throw ShapeError("label count differs from feature rows");
  if (features.rows == 0) throw ArgumentError("cannot initialize centers from zero samples");
  const auto k = static_cast<std::size_t>(num_classes);
  CenterBank bank{Matrix(k, features.cols)};
  std::vector<std::size_t> count(k, 0);
  std::vector<Real> overall(features.cols, 0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) throw ArgumentError("center initialization: label out of range");
    ++count[static_cast<std::size_t>(y)];
    for (std::size_t d = 0; d < features.cols; ++d) {
      bank.centers(static_cast<std::size_t>(y), d) += features(i, d);
      overall[d] += features(i, d);
    }
  }
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < features.cols; ++d)
      bank.centers(c, d) = count[c] ? bank.centers(c, d) / static_cast<Real>(count[c])
                                    : overall[d] / static_cast<Real>(features.rows);
  return bank;
}

CenterBank init_center_bank(const nets::Encoder& encoder, const dataio::TimeSeriesDataset& ds) {
  if (!ds.fully_labeled()) throw ArgumentError("center initialization needs a fully labeled set");
  return init_center_bank(encoder.infer(ds.samples), ds.labels, ds.num_classes);
}

Real discriminator_loss(std::span<const Real> d_src, std::span<const Real> d_tgt, AdvLossMode mode) {
  check_probabilities(d_src, "source discriminator outputs");
  check_probabilities(d_tgt, "target discriminator outputs");
  Real ls = 0, lt = 0;
  if (mode == AdvLossMode::shared_half) {
    for (Real d : d_src) ls += -std::log(1 - d);
    for (Real d : d_tgt) lt += -std::log(d);
  } else {
    for (Real d : d_src) ls += -std::log(std::max(0.5 - d, kLiteralClamp));
    for (Real d : d_tgt) lt += -std::log(std::max(d - 0.5, kLiteralClamp));
  }
  return ls / static_cast<Real>(d_src.size()) + lt / static_cast<Real>(d_tgt.size());
}

Real encoder_adv_loss(std::span<const Real> d, AdvLossMode mode) {
  check_probabilities(d, "discriminator outputs");
  Real s = 0;
  for (Real v : d)
    s += mode == AdvLossMode::shared_half ? -(0.5 * std::log(v) + 0.5 * std::log(1 - v))
                                          : -std::log(v);
  return s / static_cast<Real>(d.size());
}

DiscLossGrad discriminator_loss_logits(std::span<const Real> z_src, std::span<const Real> z_tgt,
                                       AdvLossMode mode) {
  if (z_src.empty() || z_tgt.empty()) throw ArgumentError("discriminator loss of an empty batch");
  DiscLossGrad out;
  out.dlogits_src.resize(z_src.size());
  out.dlogits_tgt.resize(z_tgt.size());
  const Real inv_s = 1.0 / static_cast<Real>(z_src.size());
  const Real inv_t = 1.0 / static_cast<Real>(z_tgt.size());
  for (std::size_t i = 0; i < z_src.size(); ++i) {
    const Real z = z_src[i];
    const Real d = nets::logistic(z);
    if (mode == AdvLossMode::shared_half) {
      out.loss += softplus(z) * inv_s;  // -log(1 - sigma(z))
      out.dlogits_src[i] = d * inv_s;
    } else {
      const Real arg = 0.5 - d;
      out.loss += -std::log(std::max(arg, kLiteralClamp)) * inv_s;
      out.dlogits_src[i] = arg > kLiteralClamp ? d * (1 - d) / arg * inv_s : 0;
    }
  }
  for (std::size_t i = 0; i < z_tgt.size(); ++i) {
    const Real z = z_tgt[i];
    const Real d = nets::logistic(z);
    if (mode == AdvLossMode::shared_half) {
      out.loss += softplus(-z) * inv_t;  // -log sigma(z)
      out.dlogits_tgt[i] = (d - 1) * inv_t;
    } else {
      const Real arg = d - 0.5;
      out.loss += -std::log(std::max(arg, kLiteralClamp)) * inv_t;
      out.dlogits_tgt[i] = arg > kLiteralClamp ? -d * (1 - d) / arg * inv_t : 0;
    }
  }
  return out;
}

EncLossGrad encoder_adv_loss_logits(std::span<const Real> z, AdvLossMode mode) {
  if (z.empty()) throw ArgumentError("encoder adversarial loss of an empty batch");
  EncLossGrad out;
  out.dlogits.resize(z.size());
  const Real inv = 1.0 / static_cast<Real>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Real d = nets::logistic(z[i]);
    if (mode == AdvLossMode::shared_half) {
      out.loss += 0.5 * (softplus(-z[i]) + softplus(z[i])) * inv;
      out.dlogits[i] = (d - 0.5) * inv;
    } else {
      out.loss += softplus(-z[i]) * inv;
      out.dlogits[i] = (d - 1) * inv;
    }
  }
  return out;
}

Real center_loss(const Matrix& features, std::span<const int> labels, const CenterBank& bank) {
  check_labels(features, labels, bank);
  Real s = 0;
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto c = bank.centers.row(static_cast<std::size_t>(labels[i]));
    for (std::size_t d = 0; d < features.cols; ++d) {
      const Real diff = features(i, d) - c[d];
      s += diff * diff;
    }
  }
  return 0.5 * s;
}

Matrix center_grad(const Matrix& features, std::span<const int> labels, const CenterBank& bank) {
  check_labels(features, labels, bank);
  Matrix g(features.rows, features.cols);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto c = bank.centers.row(static_cast<std::size_t>(labels[i]));
    for (std::size_t d = 0; d < features.cols; ++d) g(i, d) = features(i, d) - c[d];
  }
  return g;
}

void center_update(const Matrix& features, std::span<const int> labels, CenterBank& bank,
                   double lr_center) {
  check_labels(features, labels, bank);
  const std::size_t k = bank.num_classes();
  Matrix delta(k, bank.dim());
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto j = static_cast<std::size_t>(labels[i]);
    ++count[j];
    for (std::size_t d = 0; d < bank.dim(); ++d) delta(j, d) += bank.centers(j, d) - features(i, d);
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] == 0) continue;
    const Real damp = 1.0 / (1.0 + static_cast<Real>(count[j]));
    for (std::size_t d = 0; d < bank.dim(); ++d) bank.centers(j, d) -= lr_center * delta(j, d) * damp;
  }
}

bool AdvBatchLosses::finite() const {
  for (Real v : {loss_disc, loss_enc_src, loss_enc_tgt, loss_center, mean_d_src, mean_d_tgt})
    if (!std::isfinite(v)) return false;
  return true;
}

void write_metrics(const std::vector<EpochMetrics>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& h : history) {
    const auto& l = h.losses;
    out << json{{"epoch", h.epoch},
                {"loss_disc", l.loss_disc},
                {"loss_enc_src", l.loss_enc_src},
                {"loss_enc_tgt", l.loss_enc_tgt},
                {"loss_center", l.loss_center},
                {"mean_d_src", l.mean_d_src},
                {"mean_d_tgt", l.mean_d_tgt}}
               .dump()
        << '\n';
  }
  if (!out) throw IoError("write failed on " + path.string());
}

namespace {

// One discriminator step on detached features; returns its loss.
Real discriminator_step(nets::Discriminator& disc, const Matrix& fs, const Matrix& ft,
                        nets::OptimState& opt, AdvLossMode mode) {
  nets::DiscriminatorTape ts, tt;
  const auto os = disc.forward(fs, &ts);
  const auto ot = disc.forward(ft, &tt);
  const auto lg = discriminator_loss_logits(os.logits, ot.logits, mode);
  if (!std::isfinite(lg.loss)) non_finite("discriminator loss", mode);
  nets::NetParams grads = disc.params().zeros_like();
  disc.backward(ts, lg.dlogits_src, grads);
  disc.backward(tt, lg.dlogits_tgt, grads);
  nets::adam_step(disc.params(), grads, opt);
  return lg.loss;
}

struct EncoderSide {
  Real adv_loss = 0;
  Real mean_d = 0;
  Matrix dfeatures;
};

// Adversarial loss of one domain against a frozen discriminator, with its feature gradient.
EncoderSide encoder_side(const nets::Discriminator& disc, const Matrix& f, AdvLossMode mode) {
  nets::DiscriminatorTape tape;
  const auto o = disc.forward(f, &tape);
  const auto lg = encoder_adv_loss_logits(o.logits, mode);
  EncoderSide side;
  side.adv_loss = lg.loss;
  side.mean_d = mean(o.probabilities);
  nets::NetParams scratch = disc.params().zeros_like();
  disc.backward(tape, lg.dlogits, scratch, &side.dfeatures);
  return side;
}

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

}  // namespace

AdaptResult adapt(nets::Encoder& source_encoder, nets::Encoder& target_encoder,
                  nets::Discriminator& discriminator, const dataio::TimeSeriesDataset& source_train,
                  const dataio::TimeSeriesDataset& target_labeled, CenterBank bank,
                  const TrainHyperparams& hp, std::uint64_t seed) {
  hp.validate(source_train.num_classes);
  if (target_labeled.size() == 0) throw EmptyLabelSetError("adaptation needs labeled target samples");
  if (!target_labeled.fully_labeled()) throw ArgumentError("adaptation target set must be fully labeled");
  if (!source_train.fully_labeled()) throw ArgumentError("adaptation source set must be fully labeled");
  if (source_train.num_classes != target_labeled.num_classes)
    throw ArgumentError("source and target class counts differ");
  bank.validate(static_cast<std::size_t>(source_train.num_classes));

  const AdvLossMode mode = hp.adv_mode;
  nets::OptimState disc_opt(discriminator.params(), hp.adam(hp.lr_disc));
  nets::OptimState src_opt(source_encoder.params(), hp.adam(hp.lr_src_enc));
  nets::OptimState tgt_opt(target_encoder.params(), hp.adam(hp.lr_tgt_enc));
  std::mt19937_64 rng(mix_seed(seed, 21));
  const std::uint64_t src_seed = mix_seed(seed, 22);
  const std::uint64_t tgt_seed = mix_seed(seed, 23);
  const auto lambda = static_cast<Real>(hp.center_weight);

  AdaptResult result;
  for (int epoch = 0; epoch < hp.epochs_adapt; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto src_batches = dataio::epoch_batches(source_train.size(), hp.batch_size, src_seed, e);
    const auto tgt_batches = dataio::epoch_batches(target_labeled.size(), hp.batch_size, tgt_seed, e);
    const std::size_t pairs = std::min(src_batches.size(), tgt_batches.size());

    AdvBatchLosses sum;
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto bs = dataio::gather(source_train, src_batches[p]);
      const auto bt = dataio::gather(target_labeled, tgt_batches[p]);

      nets::EncoderTape tape_s, tape_t;
      const Matrix fs = source_encoder.forward(bs.samples, nets::Mode::train, &rng, &tape_s);
      const Matrix ft = target_encoder.forward(bt.samples, nets::Mode::train, &rng, &tape_t);

      AdvBatchLosses step;
      step.loss_disc = discriminator_step(discriminator, fs, ft, disc_opt, mode);

      auto side_s = encoder_side(discriminator, fs, mode);
      auto side_t = encoder_side(discriminator, ft, mode);
      step.loss_enc_src = side_s.adv_loss;
      step.loss_enc_tgt = side_t.adv_loss;
      step.mean_d_src = side_s.mean_d;
      step.mean_d_tgt = side_t.mean_d;

      if (hp.lca_enabled) {
        step.loss_center = center_loss(fs, bs.labels, bank) + center_loss(ft, bt.labels, bank);
        const Matrix gs = center_grad(fs, bs.labels, bank);
        const Matrix gt = center_grad(ft, bt.labels, bank);
        for (std::size_t i = 0; i < gs.data.size(); ++i) side_s.dfeatures.data[i] += lambda * gs.data[i];
        for (std::size_t i = 0; i < gt.data.size(); ++i) side_t.dfeatures.data[i] += lambda * gt.data[i];
      }
      if (!step.finite()) non_finite("encoder loss", mode);

      nets::NetParams gs = source_encoder.params().zeros_like();
      source_encoder.backward(tape_s, side_s.dfeatures, gs);
      nets::NetParams gt = target_encoder.params().zeros_like();
      target_encoder.backward(tape_t, side_t.dfeatures, gt);
      nets::adam_step(source_encoder.params(), gs, src_opt);
      nets::adam_step(target_encoder.params(), gt, tgt_opt);

      if (hp.lca_enabled) {
        std::vector<int> labels = bs.labels;
        labels.insert(labels.end(), bt.labels.begin(), bt.labels.end());
        center_update(stack_rows(fs, ft), labels, bank, hp.lr_center);
      }

      sum.loss_disc += step.loss_disc;
      sum.loss_enc_src += step.loss_enc_src;
      sum.loss_enc_tgt += step.loss_enc_tgt;
      sum.loss_center += step.loss_center;
      sum.mean_d_src += step.mean_d_src;
      sum.mean_d_tgt += step.mean_d_tgt;
    }
    const Real inv = pairs ? 1.0 / static_cast<Real>(pairs) : 0;
    for (Real* v : {&sum.loss_disc, &sum.loss_enc_src, &sum.loss_enc_tgt, &sum.loss_center,
                    &sum.mean_d_src, &sum.mean_d_tgt})
      *v *= inv;
    result.history.push_back({epoch + 1, sum});
  }
  if (!all_finite(bank.centers.data)) non_finite("center bank", mode);
  result.bank = std::move(bank);
  return result;
}

nets::Classifier train_shared_classifier(const nets::Encoder& source_encoder,
                                         const nets::Encoder& target_encoder,
                                         const dataio::TimeSeriesDataset& source_train,
                                         const dataio::TimeSeriesDataset& target_labeled,
                                         const TrainHyperparams& hp, std::uint64_t seed) {
  if (source_train.size() == 0 || target_labeled.size() == 0)
    throw ArgumentError("shared classifier needs samples from both domains");
  if (!source_train.fully_labeled() || !target_labeled.fully_labeled())
    throw ArgumentError("shared classifier inputs must be fully labeled");
  if (source_train.num_classes != target_labeled.num_classes)
    throw ArgumentError("source and target class counts differ");
  hp.validate(source_train.num_classes);

  const Matrix fs = source_encoder.infer(source_train.samples);
  const Matrix ft = target_encoder.infer(target_labeled.samples);
  nets::Classifier clf(fs.cols, source_train.num_classes, mix_seed(seed, 31));
  nets::OptimState opt(clf.params(), hp.adam(hp.lr_clf));
  const std::uint64_t src_seed = mix_seed(seed, 32);
  const std::uint64_t tgt_seed = mix_seed(seed, 33);

  const auto rows_of = [](const Matrix& f, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), f.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(f.row(idx[i]).begin(), f.cols, out.row(i).begin());
    return out;
  };
  const auto labels_of = [](const std::vector<int>& y, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(y[i]);
    return out;
  };

  for (int epoch = 0; epoch < hp.epochs_shared_classifier; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto sb = dataio::epoch_batches(fs.rows, hp.batch_size, src_seed, e);
    const auto tb = dataio::epoch_batches(ft.rows, hp.batch_size, tgt_seed, e);
    const std::size_t pairs = std::min(sb.size(), tb.size());
    for (std::size_t p = 0; p < pairs; ++p) {
      const Matrix xs = rows_of(fs, sb[p]);
      const Matrix xt = rows_of(ft, tb[p]);
      const auto ls = cross_entropy(clf.forward(xs).logits, labels_of(source_train.labels, sb[p]));
      const auto lt = cross_entropy(clf.forward(xt).logits, labels_of(target_labeled.labels, tb[p]));
      if (!std::isfinite(ls.loss + lt.loss)) throw NumericError("non-finite shared classifier loss");
      nets::NetParams grads = clf.params().zeros_like();
      clf.backward(xs, ls.dlogits, grads);
      clf.backward(xt, lt.dlogits, grads);
      nets::adam_step(clf.params(), grads, opt);
    }
  }
  return clf;
}

DomainOutputs mean_discriminator_outputs(const nets::Discriminator& discriminator,
                                         const Matrix& source_features,
                                         const Matrix& target_features) {
  if (source_features.rows == 0 || target_features.rows == 0)
    throw ArgumentError("discriminator outputs need samples from both domains");
  return {mean(discriminator.forward(source_features).probabilities),
          mean(discriminator.forward(target_features).probabilities)};
}

DomainOutputs probe_discriminator(const Matrix& source_train, const Matrix& target_train,
                                  const Matrix& source_heldout, const Matrix& target_heldout,
                                  const TrainHyperparams& hp, int epochs, std::uint64_t seed) {
  if (source_train.rows == 0 || target_train.rows == 0)
    throw ArgumentError("probe needs training features from both domains");
  if (epochs < 1) throw ArgumentError("probe needs at least one epoch");
  nets::Discriminator disc(source_train.cols, source_train.cols, mix_seed(seed, 41));
  nets::OptimState opt(disc.params(), hp.adam(hp.lr_disc));
  const std::uint64_t src_seed = mix_seed(seed, 42);
  const std::uint64_t tgt_seed = mix_seed(seed, 43);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto sb = dataio::epoch_batches(source_train.rows, hp.batch_size, src_seed, e);
    const auto tb = dataio::epoch_batches(target_train.rows, hp.batch_size, tgt_seed, e);
    const std::size_t pairs = std::min(sb.size(), tb.size());
    for (std::size_t p = 0; p < pairs; ++p) {
      Matrix xs(sb[p].size(), source_train.cols), xt(tb[p].size(), target_train.cols);
      for (std::size_t i = 0; i < sb[p].size(); ++i)
        std::copy_n(source_train.row(sb[p][i]).begin(), xs.cols, xs.row(i).begin());
      for (std::size_t i = 0; i < tb[p].size(); ++i)
        std::copy_n(target_train.row(tb[p][i]).begin(), xt.cols, xt.row(i).begin());
      discriminator_step(disc, xs, xt, opt, AdvLossMode::shared_half);
    }
  }
  return mean_discriminator_outputs(disc, source_heldout, target_heldout);
}

Real within_class_distance(const Matrix& features, std::span<const int> labels, int num_classes) {
  const CenterBank means = init_center_bank(features, labels, num_classes);
  Real s = 0;
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto c = means.centers.row(static_cast<std::size_t>(labels[i]));
    Real d2 = 0;
    for (std::size_t d = 0; d < features.cols; ++d) {
      const Real diff = features(i, d) - c[d];
      d2 += diff * diff;
    }
    s += std::sqrt(d2);
  }
  return s / static_cast<Real>(features.rows);
}

}  // namespace glada::align
