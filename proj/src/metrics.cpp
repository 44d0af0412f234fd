#include "glada/metrics.hpp"

#include <numeric>
#include <string>

namespace glada::metrics {

namespace {

void check_inputs(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  if (y_true.empty()) throw ArgumentError("F1 of an empty label set");
  if (y_true.size() != y_pred.size()) throw ShapeError("true and predicted label counts differ");
  if (num_classes < 1) throw ArgumentError("class count must be positive");
  for (auto v : {y_true, y_pred})
    for (int y : v)
      if (y < 0 || y >= num_classes)
        throw ArgumentError("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
}

}  // namespace

std::vector<Real> f1_per_class(std::span<const int> y_true, std::span<const int> y_pred,
                               int num_classes) {
  check_inputs(y_true, y_pred, num_classes);
  const auto k = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const auto t = static_cast<std::size_t>(y_true[i]);
    const auto p = static_cast<std::size_t>(y_pred[i]);
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  std::vector<Real> f1(k, 0);
  for (std::size_t c = 0; c < k; ++c) {
    // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN) whenever it is defined.
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (tp[c] > 0) f1[c] = 2.0 * static_cast<Real>(tp[c]) / static_cast<Real>(denom);
  }
  return f1;
}

Real macro_f1(std::span<const Real> per_class) {
  if (per_class.empty()) throw ArgumentError("macro-F1 over zero classes");
  return std::accumulate(per_class.begin(), per_class.end(), Real{0}) /
         static_cast<Real>(per_class.size());
}

Real macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  const auto f1 = f1_per_class(y_true, y_pred, num_classes);
  return macro_f1(f1);
}

Real accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty()) throw ArgumentError("accuracy of an empty label set");
  if (y_true.size() != y_pred.size()) throw ShapeError("true and predicted label counts differ");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hit += y_true[i] == y_pred[i];
  return static_cast<Real>(hit) / static_cast<Real>(y_true.size());
}

}  // namespace glada::metrics
