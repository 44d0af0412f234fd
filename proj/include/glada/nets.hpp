#pragma once

// Network families: the 1-d CNN encoder, the single-layer classifier and the
// three-layer domain discriminator. Each network owns a NetParams bank;
// forward passes optionally record a tape that backward() consumes to
// produce gradients in a bank with identical layout.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "glada/common.hpp"
#include "glada/kernels.hpp"

namespace glada::nets {

enum class Role { encoder, classifier, discriminator };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<Real> values;
  bool trainable = true;  // false for batch-norm running statistics

  bool operator==(const NamedArray&) const = default;
};

// Ordered parameter bank of one network.
class NetParams {
 public:
  NetParams() = default;
  explicit NetParams(Role role) : role_(role) {}

  Role role() const { return role_; }
  std::vector<NamedArray>& arrays() { return arrays_; }
  const std::vector<NamedArray>& arrays() const { return arrays_; }

  NamedArray& add(std::string name, std::vector<std::size_t> shape, Real fill, bool trainable);
  NamedArray& get(std::string_view name);
  const NamedArray& get(std::string_view name) const;

  // Same names and shapes, all values zero.
  NetParams zeros_like() const;
  bool same_layout(const NetParams& other) const;
  bool finite() const;
  std::size_t value_count() const;

  bool operator==(const NetParams&) const = default;

 private:
  Role role_ = Role::encoder;
  std::vector<NamedArray> arrays_;
};

struct ConvSpec {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  bool operator==(const ConvSpec&) const = default;
};

struct EncoderConfig {
  std::size_t in_channels = 9;
  std::size_t mid_channels = 64;   // block widths: mid -> 2*mid -> feature_dim
  std::size_t feature_dim = 128;
  ConvSpec conv1{5, 1, 2};
  ConvSpec conv_rest{8, 1, 4};
  ConvSpec pool{2, 2, 1};
  double dropout = 0.5;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  // Multivariate HAR-family backbone.
  static EncoderConfig multivariate(std::size_t in_channels);
  // Single-channel sleep-EEG backbone.
  static EncoderConfig univariate_eeg();

  std::size_t block_out_channels(std::size_t block) const;
  // Time length after each of the three blocks; zero marks an input that is too short.
  std::vector<std::size_t> block_lengths(std::size_t input_length) const;
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

enum class Mode { train, eval };

struct EncoderTape {
  struct Block {
    kernels::ConvGeometry conv;
    kernels::PoolGeometry pool;
    std::vector<Real> cols;        // im2col of the block input
    std::vector<Real> xhat;        // normalized pre-activation [C][B*L]
    std::vector<Real> inv_std;     // per channel
    std::vector<Real> activation;  // post-ReLU [C][B*L]
    std::vector<std::int32_t> argmax;
  };
  Mode mode = Mode::eval;
  std::size_t batch = 0;
  std::size_t out_length = 0;  // time length entering the average pool
  Block blocks[3];
  std::vector<Real> dropout_mask;  // post-pool block 1, scaled by 1/(1-rate); empty if unused
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& config, std::uint64_t seed);
  // Adopts an existing bank; throws ShapeError if it does not fit the config.
  Encoder(const EncoderConfig& config, NetParams params);

  const EncoderConfig& config() const { return config_; }
  NetParams& params() { return params_; }
  const NetParams& params() const { return params_; }

  // x[b][m][n] -> features[b][feature_dim]. Train mode uses batch statistics,
  // updates the running statistics and samples dropout from rng.
  Matrix forward(const Tensor3& x, Mode mode, std::mt19937_64* rng = nullptr,
                 EncoderTape* tape = nullptr);
  // Eval-mode forward in chunks; output rows are independent of the chunking.
  Matrix infer(const Tensor3& x, std::size_t chunk = 256) const;

  // Accumulates parameter gradients into grads; writes the input gradient if requested.
  void backward(const EncoderTape& tape, const Matrix& dfeatures, NetParams& grads,
                Tensor3* dinput = nullptr) const;

 private:
  Matrix run(const Tensor3& x, Mode mode, std::mt19937_64* rng, EncoderTape* tape,
             NetParams& bank) const;

  EncoderConfig config_;
  NetParams params_{Role::encoder};
};

// Deep copy of a source encoder bank; throws ArgumentError unless role is encoder.
NetParams init_target_from_source(const NetParams& source);
Encoder init_target_from_source(const Encoder& source);

struct ClassifierOutput {
  Matrix logits;
  Matrix probabilities;
};

// Row-wise softmax, max-shifted.
Matrix softmax_rows(const Matrix& logits);

class Classifier {
 public:
  Classifier() = default;
  Classifier(std::size_t feature_dim, int num_classes, std::uint64_t seed);
  Classifier(std::size_t feature_dim, int num_classes, NetParams params);

  std::size_t feature_dim() const { return feature_dim_; }
  int num_classes() const { return num_classes_; }
  NetParams& params() { return params_; }
  const NetParams& params() const { return params_; }

  ClassifierOutput forward(const Matrix& features) const;
  void backward(const Matrix& features, const Matrix& dlogits, NetParams& grads,
                Matrix* dfeatures = nullptr) const;

 private:
  std::size_t feature_dim_ = 128;
  int num_classes_ = 2;
  NetParams params_{Role::classifier};
};

struct DiscriminatorTape {
  Matrix input;
  Matrix hidden1;  // post-ReLU
  Matrix hidden2;
};

struct DiscriminatorOutput {
  std::vector<Real> logits;
  std::vector<Real> probabilities;  // logistic(logits), probability of "target domain"
};

Real logistic(Real z);

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed);
  Discriminator(std::size_t feature_dim, std::size_t hidden, NetParams params);

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t hidden() const { return hidden_; }
  NetParams& params() { return params_; }
  const NetParams& params() const { return params_; }

  DiscriminatorOutput forward(const Matrix& features, DiscriminatorTape* tape = nullptr) const;
  void backward(const DiscriminatorTape& tape, std::span<const Real> dlogits, NetParams& grads,
                Matrix* dfeatures = nullptr) const;

 private:
  std::size_t feature_dim_ = 128;
  std::size_t hidden_ = 128;
  NetParams params_{Role::discriminator};
};

}  // namespace glada::nets
