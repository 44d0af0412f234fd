#pragma once

#include <span>
#include <vector>

#include "glada/common.hpp"

namespace glada::metrics {

// Per-class F1 from the confusion counts; a class with precision + recall = 0
// (including one that is never true and never predicted) scores 0.
std::vector<Real> f1_per_class(std::span<const int> y_true, std::span<const int> y_pred,
                               int num_classes);

// Unweighted mean over all K classes.
Real macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int num_classes);
Real macro_f1(std::span<const Real> per_class);

Real accuracy(std::span<const int> y_true, std::span<const int> y_pred);

}  // namespace glada::metrics
