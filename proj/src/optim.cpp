#include "glada/optim.hpp"

#include <cmath>

namespace glada::nets {

OptimState::OptimState(const NetParams& params, AdamSettings s) : settings(s) {
  if (!(s.learning_rate > 0)) throw ArgumentError("learning rate must be positive");
  for (const auto& a : params.arrays()) {
    const std::size_t n = a.trainable ? a.values.size() : 0;
    first_moment.emplace_back(n, Real{0});
    second_moment.emplace_back(n, Real{0});
  }
}

void adam_step(NetParams& params, const NetParams& grads, OptimState& state) {
  if (!params.same_layout(grads)) throw ShapeError("gradient bank does not match parameters");
  auto& arrays = params.arrays();
  if (state.first_moment.size() != arrays.size())
    throw ShapeError("optimizer state was built for a different parameter bank");
  for (std::size_t a = 0; a < arrays.size(); ++a) {
    if (arrays[a].trainable && !all_finite(grads.arrays()[a].values))
      throw NumericError("non-finite gradient in '" + arrays[a].name + "'; batch rejected");
  }

  const auto& s = state.settings;
  const std::uint64_t t = state.step + 1;
  const Real c1 = 1 - std::pow(s.beta1, static_cast<Real>(t));
  const Real c2 = 1 - std::pow(s.beta2, static_cast<Real>(t));
  for (std::size_t a = 0; a < arrays.size(); ++a) {
    if (!arrays[a].trainable) continue;
    auto& w = arrays[a].values;
    const auto& g = grads.arrays()[a].values;
    auto& m = state.first_moment[a];
    auto& v = state.second_moment[a];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1 - s.beta2) * g[i] * g[i];
      const Real m_hat = m[i] / c1;
      const Real v_hat = v[i] / c2;
      w[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  }
  state.step = t;
}

}  // namespace glada::nets
