#include "glada/nets.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace glada::nets {

namespace kp = kernels::parallel;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::encoder: return "encoder";
    case Role::classifier: return "classifier";
    case Role::discriminator: return "discriminator";
  }
  return "unknown";
}

Role role_from_string(std::string_view s) {
  if (s == "encoder") return Role::encoder;
  if (s == "classifier") return Role::classifier;
  if (s == "discriminator") return Role::discriminator;
  throw FormatError("unknown network role '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// NetParams

NamedArray& NetParams::add(std::string name, std::vector<std::size_t> shape, Real fill,
                           bool trainable) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  arrays_.push_back(NamedArray{std::move(name), std::move(shape),
                               std::vector<Real>(count, fill), trainable});
  return arrays_.back();
}

NamedArray& NetParams::get(std::string_view name) {
  for (auto& a : arrays_)
    if (a.name == name) return a;
  throw ArgumentError("no parameter array named '" + std::string(name) + "'");
}

const NamedArray& NetParams::get(std::string_view name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  throw ArgumentError("no parameter array named '" + std::string(name) + "'");
}

NetParams NetParams::zeros_like() const {
  NetParams out(role_);
  for (const auto& a : arrays_) out.add(a.name, a.shape, 0, a.trainable);
  return out;
}

bool NetParams::same_layout(const NetParams& other) const {
  if (role_ != other.role_ || arrays_.size() != other.arrays_.size()) return false;
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (arrays_[i].name != other.arrays_[i].name || arrays_[i].shape != other.arrays_[i].shape ||
        arrays_[i].values.size() != other.arrays_[i].values.size())
      return false;
  }
  return true;
}

bool NetParams::finite() const {
  return std::all_of(arrays_.begin(), arrays_.end(),
                     [](const NamedArray& a) { return all_finite(a.values); });
}

std::size_t NetParams::value_count() const {
  std::size_t n = 0;
  for (const auto& a : arrays_) n += a.values.size();
  return n;
}

// ---------------------------------------------------------------------------
// EncoderConfig

EncoderConfig EncoderConfig::multivariate(std::size_t in_channels) {
  EncoderConfig c;
  c.in_channels = in_channels;
  return c;
}

EncoderConfig EncoderConfig::univariate_eeg() {
  EncoderConfig c;
  c.in_channels = 1;
  c.mid_channels = 32;
  c.conv1 = {26, 5, 13};
  c.dropout = 0.2;
  return c;
}

std::size_t EncoderConfig::block_out_channels(std::size_t block) const {
  switch (block) {
    case 0: return mid_channels;
    case 1: return 2 * mid_channels;
    default: return feature_dim;
  }
}

std::vector<std::size_t> EncoderConfig::block_lengths(std::size_t input_length) const {
  std::vector<std::size_t> out;
  std::size_t len = input_length;
  for (std::size_t b = 0; b < 3; ++b) {
    const ConvSpec& cs = b == 0 ? conv1 : conv_rest;
    kernels::ConvGeometry g{1, 1, len, cs.kernel, cs.stride, cs.padding};
    len = len == 0 ? 0 : g.out_length();
    kernels::PoolGeometry pg{1, len, pool.kernel, pool.stride, pool.padding};
    len = len == 0 ? 0 : pg.out_length();
    out.push_back(len);
  }
  return out;
}

void EncoderConfig::validate() const {
  if (in_channels < 1 || mid_channels < 1 || feature_dim < 1)
    throw ArgumentError("encoder channel counts must be positive");
  for (const ConvSpec* cs : {&conv1, &conv_rest, &pool}) {
    if (cs->kernel < 1 || cs->stride < 1)
      throw ArgumentError("encoder kernel and stride must be at least 1");
  }
  if (2 * pool.padding > pool.kernel)
    throw ArgumentError("max-pool padding must not exceed half the kernel");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0) || !(bn_eps > 0.0))
    throw ArgumentError("invalid batch-norm settings");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  auto spec = [](const ConvSpec& s) {
    return nlohmann::json::array({s.kernel, s.stride, s.padding});
  };
  j = nlohmann::json{{"in_channels", c.in_channels},
                     {"mid_channels", c.mid_channels},
                     {"feature_dim", c.feature_dim},
                     {"conv1", spec(c.conv1)},
                     {"conv_rest", spec(c.conv_rest)},
                     {"pool", spec(c.pool)},
                     {"dropout", c.dropout},
                     {"bn_momentum", c.bn_momentum},
                     {"bn_eps", c.bn_eps}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  auto spec = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 3) throw FormatError("conv spec must be [kernel, stride, padding]");
    return ConvSpec{a[0].get<std::size_t>(), a[1].get<std::size_t>(), a[2].get<std::size_t>()};
  };
  EncoderConfig d;
  c.in_channels = j.value("in_channels", d.in_channels);
  c.mid_channels = j.value("mid_channels", d.mid_channels);
  c.feature_dim = j.value("feature_dim", d.feature_dim);
  c.conv1 = j.contains("conv1") ? spec(j["conv1"]) : d.conv1;
  c.conv_rest = j.contains("conv_rest") ? spec(j["conv_rest"]) : d.conv_rest;
  c.pool = j.contains("pool") ? spec(j["pool"]) : d.pool;
  c.dropout = j.value("dropout", d.dropout);
  c.bn_momentum = j.value("bn_momentum", d.bn_momentum);
  c.bn_eps = j.value("bn_eps", d.bn_eps);
}

// ---------------------------------------------------------------------------
// shared helpers

namespace {

const char* const kConvNames[3] = {"conv1.weight", "conv2.weight", "conv3.weight"};
const char* const kBnNames[3] = {"bn1", "bn2", "bn3"};

std::string bn(std::size_t block, const char* field) {
  return std::string(kBnNames[block]) + "." + field;
}

void fill_uniform(std::vector<Real>& v, Real bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<Real> dist(-bound, bound);
  for (auto& x : v) x = dist(rng);
}

// y[B][out] = x[B][in] * W^T + b with W[out][in].
Matrix linear_forward(const Matrix& x, const NamedArray& w, const NamedArray& b) {
  const std::size_t out = w.shape[0];
  const std::size_t in = w.shape[1];
  if (x.cols != in)
    throw ShapeError("linear layer expects width " + std::to_string(in) + ", got " +
                     std::to_string(x.cols));
  std::vector<Real> wt(in * out);
  kp::transpose(out, in, w.values, wt);
  Matrix y(x.rows, out);
  kp::gemm(x.rows, out, in, x.data, wt, y.data, false);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < out; ++j) y(i, j) += b.values[j];
  return y;
}

void linear_backward(const Matrix& x, const Matrix& dy, const NamedArray& w, NamedArray& gw,
                     NamedArray& gb, Matrix* dx) {
  const std::size_t out = w.shape[0];
  const std::size_t in = w.shape[1];
  std::vector<Real> dyt(out * dy.rows);
  kp::transpose(dy.rows, out, dy.data, dyt);
  kp::gemm(out, in, dy.rows, dyt, x.data, gw.values, true);
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t j = 0; j < out; ++j) gb.values[j] += dy(i, j);
  if (dx) {
    *dx = Matrix(dy.rows, in);
    kp::gemm(dy.rows, in, out, dy.data, w.values, dx->data, false);
  }
}

void check_layout(const NetParams& expected, const NetParams& given, const char* what) {
  if (!expected.same_layout(given))
    throw ShapeError(std::string(what) + ": parameter bank does not match the network layout");
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(mix_seed(seed, 0xe4c0de5u));
  std::size_t in = config_.in_channels;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t out = config_.block_out_channels(b);
    const std::size_t k = b == 0 ? config_.conv1.kernel : config_.conv_rest.kernel;
    auto& w = params_.add(kConvNames[b], {out, in, k}, 0, true);
    fill_uniform(w.values, 1.0 / std::sqrt(static_cast<Real>(in * k)), rng);
    params_.add(bn(b, "weight"), {out}, 1, true);
    params_.add(bn(b, "bias"), {out}, 0, true);
    params_.add(bn(b, "running_mean"), {out}, 0, false);
    params_.add(bn(b, "running_var"), {out}, 1, false);
    in = out;
  }
}

Encoder::Encoder(const EncoderConfig& config, NetParams params) : Encoder(config, 0) {
  check_layout(params_, params, "encoder");
  params_ = std::move(params);
}

Matrix Encoder::forward(const Tensor3& x, Mode mode, std::mt19937_64* rng, EncoderTape* tape) {
  return run(x, mode, rng, tape, params_);
}

Matrix Encoder::infer(const Tensor3& x, std::size_t chunk) const {
  if (chunk == 0) chunk = 1;
  Matrix out(x.d0, config_.feature_dim);
  for (std::size_t start = 0; start < x.d0; start += chunk) {
    const std::size_t n = std::min(chunk, x.d0 - start);
    Tensor3 part(n, x.d1, x.d2);
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(start * x.d1 * x.d2),
                n * x.d1 * x.d2, part.data.begin());
    NetParams unused;
    Matrix f = run(part, Mode::eval, nullptr, nullptr, unused);
    std::copy(f.data.begin(), f.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(start * config_.feature_dim));
  }
  return out;
}

Matrix Encoder::run(const Tensor3& x, Mode mode, std::mt19937_64* rng, EncoderTape* tape,
                    NetParams& bank) const {
  if (x.d1 != config_.in_channels)
    throw ShapeError("encoder expects " + std::to_string(config_.in_channels) +
                     " channels, got " + std::to_string(x.d1));
  if (x.d0 == 0) throw ShapeError("encoder input batch is empty");
  const auto lengths = config_.block_lengths(x.d2);
  if (std::find(lengths.begin(), lengths.end(), 0u) != lengths.end())
    throw ShapeError("series of length " + std::to_string(x.d2) + " is too short for the encoder");
  const bool train = mode == Mode::train;
  if (train && config_.dropout > 0 && rng == nullptr)
    throw ArgumentError("train-mode forward with dropout needs an RNG");

  const std::size_t batch = x.d0;
  std::size_t channels = x.d1;
  std::size_t len = x.d2;

  // [B][m][n] -> [m][B][n]
  std::vector<Real> act(channels * batch * len);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>((b * channels + c) * len), len,
                  act.begin() + static_cast<std::ptrdiff_t>((c * batch + b) * len));

  if (tape) {
    tape->mode = mode;
    tape->batch = batch;
    tape->dropout_mask.clear();
  }

  for (std::size_t blk = 0; blk < 3; ++blk) {
    const ConvSpec& cs = blk == 0 ? config_.conv1 : config_.conv_rest;
    const std::size_t out_ch = config_.block_out_channels(blk);
    const kernels::ConvGeometry g{channels, batch, len, cs.kernel, cs.stride, cs.padding};
    const std::size_t lo = g.out_length();
    const std::size_t cols_n = g.col_cols();

    std::vector<Real> cols(g.col_rows() * cols_n);
    kp::im2col(g, act, cols);
    std::vector<Real> z(out_ch * cols_n);
    kp::gemm(out_ch, cols_n, g.col_rows(), params_.get(kConvNames[blk]).values, cols, z, false);

    const auto& gamma = params_.get(bn(blk, "weight")).values;
    const auto& beta = params_.get(bn(blk, "bias")).values;
    std::vector<Real> mean(out_ch), var(out_ch);
    if (train) {
      kp::row_moments(out_ch, cols_n, z, mean, var);
      auto& rm = bank.get(bn(blk, "running_mean")).values;
      auto& rv = bank.get(bn(blk, "running_var")).values;
      const Real mom = config_.bn_momentum;
      const Real unbias =
          cols_n > 1 ? static_cast<Real>(cols_n) / static_cast<Real>(cols_n - 1) : Real{1};
      for (std::size_t c = 0; c < out_ch; ++c) {
        rm[c] = (1 - mom) * rm[c] + mom * mean[c];
        rv[c] = (1 - mom) * rv[c] + mom * var[c] * unbias;
      }
    } else {
      mean = params_.get(bn(blk, "running_mean")).values;
      var = params_.get(bn(blk, "running_var")).values;
    }

    std::vector<Real> inv_std(out_ch);
    std::vector<Real> activation(out_ch * cols_n);
    std::vector<Real> xhat(tape ? out_ch * cols_n : 0);
    for (std::size_t c = 0; c < out_ch; ++c) {
      inv_std[c] = 1.0 / std::sqrt(var[c] + config_.bn_eps);
      const Real* zc = z.data() + c * cols_n;
      Real* ac = activation.data() + c * cols_n;
      for (std::size_t j = 0; j < cols_n; ++j) {
        const Real h = (zc[j] - mean[c]) * inv_std[c];
        if (tape) xhat[c * cols_n + j] = h;
        ac[j] = std::max(Real{0}, gamma[c] * h + beta[c]);
      }
    }

    const kernels::PoolGeometry pg{out_ch * batch, lo, config_.pool.kernel, config_.pool.stride,
                                   config_.pool.padding};
    const std::size_t lp = pg.out_length();
    std::vector<Real> pooled(out_ch * batch * lp);
    std::vector<std::int32_t> where(pooled.size());
    kp::maxpool_forward(pg, activation, pooled, where);

    if (blk == 0 && train && config_.dropout > 0) {
      std::uniform_real_distribution<Real> unit(0.0, 1.0);
      const Real keep_scale = 1.0 / (1.0 - config_.dropout);
      std::vector<Real> mask(pooled.size());
      for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = unit(*rng) >= config_.dropout ? keep_scale : Real{0};
        pooled[i] *= mask[i];
      }
      if (tape) tape->dropout_mask = std::move(mask);
    }

    if (tape) {
      auto& tb = tape->blocks[blk];
      tb.conv = g;
      tb.pool = pg;
      tb.cols = std::move(cols);
      tb.xhat = std::move(xhat);
      tb.inv_std = std::move(inv_std);
      tb.activation = std::move(activation);
      tb.argmax = std::move(where);
    }
    act = std::move(pooled);
    channels = out_ch;
    len = lp;
  }

  if (tape) tape->out_length = len;
  Matrix features(batch, channels);
  const Real inv_len = 1.0 / static_cast<Real>(len);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t b = 0; b < batch; ++b) {
      const Real* row = act.data() + (c * batch + b) * len;
      Real s = 0;
      for (std::size_t t = 0; t < len; ++t) s += row[t];
      features(b, c) = s * inv_len;
    }
  }
  return features;
}

void Encoder::backward(const EncoderTape& tape, const Matrix& dfeatures, NetParams& grads,
                       Tensor3* dinput) const {
  check_layout(params_, grads, "encoder gradients");
  const std::size_t batch = tape.batch;
  const std::size_t feat = config_.feature_dim;
  if (dfeatures.rows != batch || dfeatures.cols != feat)
    throw ShapeError("feature gradient shape does not match the recorded forward pass");

  const std::size_t l3 = tape.out_length;
  std::vector<Real> d(feat * batch * l3);
  const Real inv_len = 1.0 / static_cast<Real>(l3);
  for (std::size_t c = 0; c < feat; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      std::fill_n(d.begin() + static_cast<std::ptrdiff_t>((c * batch + b) * l3), l3,
                  dfeatures(b, c) * inv_len);

  for (std::size_t step = 0; step < 3; ++step) {
    const std::size_t blk = 2 - step;
    const auto& tb = tape.blocks[blk];
    const std::size_t out_ch = config_.block_out_channels(blk);
    const std::size_t cols_n = tb.conv.col_cols();
    const std::size_t col_rows = tb.conv.col_rows();

    if (blk == 0 && !tape.dropout_mask.empty())
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= tape.dropout_mask[i];

    std::vector<Real> dz(out_ch * cols_n);
    kp::maxpool_backward(tb.pool, d, tb.argmax, dz);

    const auto& gamma = params_.get(bn(blk, "weight")).values;
    auto& dgamma = grads.get(bn(blk, "weight")).values;
    auto& dbeta = grads.get(bn(blk, "bias")).values;
    const Real n = static_cast<Real>(cols_n);
    for (std::size_t c = 0; c < out_ch; ++c) {
      Real* dc = dz.data() + c * cols_n;
      const Real* ac = tb.activation.data() + c * cols_n;
      const Real* hc = tb.xhat.data() + c * cols_n;
      Real sum_dy = 0, sum_dy_h = 0;
      for (std::size_t j = 0; j < cols_n; ++j) {
        if (ac[j] <= 0) dc[j] = 0;
        sum_dy += dc[j];
        sum_dy_h += dc[j] * hc[j];
      }
      dgamma[c] += sum_dy_h;
      dbeta[c] += sum_dy;
      const Real scale = gamma[c] * tb.inv_std[c];
      if (tape.mode == Mode::train) {
        for (std::size_t j = 0; j < cols_n; ++j)
          dc[j] = scale * (dc[j] - sum_dy / n - hc[j] * sum_dy_h / n);
      } else {
        for (std::size_t j = 0; j < cols_n; ++j) dc[j] *= scale;
      }
    }

    std::vector<Real> cols_t(cols_n * col_rows);
    kp::transpose(col_rows, cols_n, tb.cols, cols_t);
    kp::gemm(out_ch, col_rows, cols_n, dz, cols_t, grads.get(kConvNames[blk]).values, true);

    if (blk == 0 && dinput == nullptr) break;
    const auto& w = params_.get(kConvNames[blk]).values;
    std::vector<Real> wt(col_rows * out_ch);
    kp::transpose(out_ch, col_rows, w, wt);
    std::vector<Real> dcols(col_rows * cols_n);
    kp::gemm(col_rows, cols_n, out_ch, wt, dz, dcols, false);
    d.assign(tb.conv.channels * batch * tb.conv.length, 0);
    kp::col2im(tb.conv, dcols, d);
  }

  if (dinput) {
    const std::size_t m = config_.in_channels;
    const std::size_t len = tape.blocks[0].conv.length;
    *dinput = Tensor3(batch, m, len);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < m; ++c)
        std::copy_n(d.begin() + static_cast<std::ptrdiff_t>((c * batch + b) * len), len,
                    dinput->data.begin() + static_cast<std::ptrdiff_t>((b * m + c) * len));
  }
}

NetParams init_target_from_source(const NetParams& source) {
  if (source.role() != Role::encoder)
    throw ArgumentError("target initialization needs an encoder bank, got " +
                        std::string(to_string(source.role())));
  return source;
}

Encoder init_target_from_source(const Encoder& source) {
  return Encoder(source.config(), init_target_from_source(source.params()));
}

// ---------------------------------------------------------------------------
// Classifier

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto row = logits.row(i);
    const Real mx = *std::max_element(row.begin(), row.end());
    Real s = 0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      p(i, j) = std::exp(row[j] - mx);
      s += p(i, j);
    }
    for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= s;
  }
  return p;
}

Classifier::Classifier(std::size_t feature_dim, int num_classes, std::uint64_t seed)
    : feature_dim_(feature_dim), num_classes_(num_classes) {
  if (num_classes < 2) throw ArgumentError("classifier needs at least two classes");
  if (feature_dim < 1) throw ArgumentError("classifier feature width must be positive");
  std::mt19937_64 rng(mix_seed(seed, 0xc1a55u));
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(feature_dim));
  const auto k = static_cast<std::size_t>(num_classes);
  fill_uniform(params_.add("fc.weight", {k, feature_dim}, 0, true).values, bound, rng);
  fill_uniform(params_.add("fc.bias", {k}, 0, true).values, bound, rng);
}

Classifier::Classifier(std::size_t feature_dim, int num_classes, NetParams params)
    : Classifier(feature_dim, num_classes, 0) {
  check_layout(params_, params, "classifier");
  params_ = std::move(params);
}

ClassifierOutput Classifier::forward(const Matrix& features) const {
  ClassifierOutput out;
  out.logits = linear_forward(features, params_.get("fc.weight"), params_.get("fc.bias"));
  out.probabilities = softmax_rows(out.logits);
  return out;
}

void Classifier::backward(const Matrix& features, const Matrix& dlogits, NetParams& grads,
                          Matrix* dfeatures) const {
  check_layout(params_, grads, "classifier gradients");
  if (dlogits.rows != features.rows || dlogits.cols != static_cast<std::size_t>(num_classes_))
    throw ShapeError("classifier logit gradient has the wrong shape");
  linear_backward(features, dlogits, params_.get("fc.weight"), grads.get("fc.weight"),
                  grads.get("fc.bias"), dfeatures);
}

// ---------------------------------------------------------------------------
// Discriminator

Real logistic(Real z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const Real e = std::exp(z);
  return e / (1.0 + e);
}

Discriminator::Discriminator(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed)
    : feature_dim_(feature_dim), hidden_(hidden) {
  if (feature_dim < 1 || hidden < 1) throw ArgumentError("discriminator widths must be positive");
  std::mt19937_64 rng(mix_seed(seed, 0xd15c0u));
  const Real b1 = 1.0 / std::sqrt(static_cast<Real>(feature_dim));
  const Real b2 = 1.0 / std::sqrt(static_cast<Real>(hidden));
  fill_uniform(params_.add("fc1.weight", {hidden, feature_dim}, 0, true).values, b1, rng);
  fill_uniform(params_.add("fc1.bias", {hidden}, 0, true).values, b1, rng);
  fill_uniform(params_.add("fc2.weight", {hidden, hidden}, 0, true).values, b2, rng);
  fill_uniform(params_.add("fc2.bias", {hidden}, 0, true).values, b2, rng);
  fill_uniform(params_.add("fc3.weight", {1, hidden}, 0, true).values, b2, rng);
  fill_uniform(params_.add("fc3.bias", {1}, 0, true).values, b2, rng);
}

Discriminator::Discriminator(std::size_t feature_dim, std::size_t hidden, NetParams params)
    : Discriminator(feature_dim, hidden, 0) {
  check_layout(params_, params, "discriminator");
  params_ = std::move(params);
}

DiscriminatorOutput Discriminator::forward(const Matrix& features, DiscriminatorTape* tape) const {
  Matrix h1 = linear_forward(features, params_.get("fc1.weight"), params_.get("fc1.bias"));
  for (auto& v : h1.data) v = std::max(Real{0}, v);
  Matrix h2 = linear_forward(h1, params_.get("fc2.weight"), params_.get("fc2.bias"));
  for (auto& v : h2.data) v = std::max(Real{0}, v);
  const Matrix z = linear_forward(h2, params_.get("fc3.weight"), params_.get("fc3.bias"));

  DiscriminatorOutput out;
  out.logits = z.data;
  out.probabilities.resize(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) out.probabilities[i] = logistic(z.data[i]);
  if (tape) {
    tape->input = features;
    tape->hidden1 = std::move(h1);
    tape->hidden2 = std::move(h2);
  }
  return out;
}

void Discriminator::backward(const DiscriminatorTape& tape, std::span<const Real> dlogits,
                             NetParams& grads, Matrix* dfeatures) const {
  check_layout(params_, grads, "discriminator gradients");
  if (dlogits.size() != tape.input.rows)
    throw ShapeError("discriminator logit gradient has the wrong length");
  Matrix dz(dlogits.size(), 1);
  std::copy(dlogits.begin(), dlogits.end(), dz.data.begin());

  Matrix dh2;
  linear_backward(tape.hidden2, dz, params_.get("fc3.weight"), grads.get("fc3.weight"),
                  grads.get("fc3.bias"), &dh2);
  for (std::size_t i = 0; i < dh2.data.size(); ++i)
    if (tape.hidden2.data[i] <= 0) dh2.data[i] = 0;
  Matrix dh1;
  linear_backward(tape.hidden1, dh2, params_.get("fc2.weight"), grads.get("fc2.weight"),
                  grads.get("fc2.bias"), &dh1);
  for (std::size_t i = 0; i < dh1.data.size(); ++i)
    if (tape.hidden1.data[i] <= 0) dh1.data[i] = 0;
  linear_backward(tape.input, dh1, params_.get("fc1.weight"), grads.get("fc1.weight"),
                  grads.get("fc1.bias"), dfeatures);
}

}  // namespace glada::nets
