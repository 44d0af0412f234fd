#include <algorithm>
#include <limits>

#include "glada/kernels.hpp"

namespace glada::kernels::serial {

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const Real> a,
          std::span<const Real> b, std::span<Real> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = accumulate ? c[i * n + j] : 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, std::span<const Real> in, std::span<Real> out) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

void im2col(const ConvGeometry& g, std::span<const Real> x, std::span<Real> cols) {
  const std::size_t lo = g.out_length();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t q = 0; q < g.kernel; ++q) {
      const std::size_t r = c * g.kernel + q;
      for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t t = 0; t < lo; ++t) {
          const auto src = static_cast<std::ptrdiff_t>(t * g.stride + q) -
                           static_cast<std::ptrdiff_t>(g.padding);
          Real v = 0;
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(g.length))
            v = x[(c * g.batch + b) * g.length + static_cast<std::size_t>(src)];
          cols[r * g.batch * lo + b * lo + t] = v;
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, std::span<const Real> cols, std::span<Real> dx) {
  const std::size_t lo = g.out_length();
  std::fill(dx.begin(), dx.begin() + g.channels * g.batch * g.length, Real{0});
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t q = 0; q < g.kernel; ++q) {
      const std::size_t r = c * g.kernel + q;
      for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t t = 0; t < lo; ++t) {
          const auto src = static_cast<std::ptrdiff_t>(t * g.stride + q) -
                           static_cast<std::ptrdiff_t>(g.padding);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(g.length))
            dx[(c * g.batch + b) * g.length + static_cast<std::size_t>(src)] +=
                cols[r * g.batch * lo + b * lo + t];
        }
      }
    }
  }
}

void maxpool_forward(const PoolGeometry& g, std::span<const Real> x, std::span<Real> y,
                     std::span<std::int32_t> argmax) {
  const std::size_t lo = g.out_length();
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t t = 0; t < lo; ++t) {
      Real best = -std::numeric_limits<Real>::infinity();
      std::int32_t where = -1;
      for (std::size_t q = 0; q < g.kernel; ++q) {
        const auto src = static_cast<std::ptrdiff_t>(t * g.stride + q) -
                         static_cast<std::ptrdiff_t>(g.padding);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(g.length)) continue;
        const Real v = x[r * g.length + static_cast<std::size_t>(src)];
        if (where < 0 || v > best) {
          best = v;
          where = static_cast<std::int32_t>(src);
        }
      }
      y[r * lo + t] = best;
      argmax[r * lo + t] = where;
    }
  }
}

void maxpool_backward(const PoolGeometry& g, std::span<const Real> dy,
                      std::span<const std::int32_t> argmax, std::span<Real> dx) {
  const std::size_t lo = g.out_length();
  std::fill(dx.begin(), dx.begin() + g.rows * g.length, Real{0});
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t t = 0; t < lo; ++t)
      dx[r * g.length + static_cast<std::size_t>(argmax[r * lo + t])] += dy[r * lo + t];
}

void row_moments(std::size_t rows, std::size_t cols, std::span<const Real> x, std::span<Real> mean,
                 std::span<Real> var) {
  for (std::size_t r = 0; r < rows; ++r) {
    Real s = 0;
    for (std::size_t j = 0; j < cols; ++j) s += x[r * cols + j];
    const Real mu = s / static_cast<Real>(cols);
    Real ss = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      const Real d = x[r * cols + j] - mu;
      ss += d * d;
    }
    mean[r] = mu;
    var[r] = ss / static_cast<Real>(cols);
  }
}

void pairwise_sq_distances(std::size_t n, std::size_t dim, std::span<const Real> x,
                           std::span<Real> d) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real s = 0;
      for (std::size_t q = 0; q < dim; ++q) {
        const Real diff = x[i * dim + q] - x[j * dim + q];
        s += diff * diff;
      }
      d[i * n + j] = s;
    }
  }
}

}  // namespace glada::kernels::serial
