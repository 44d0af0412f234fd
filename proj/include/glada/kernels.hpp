#pragma once

// Dense compute kernels used by the networks and the label-spreading graph.
//
// Two implementations share every signature:
//   kernels::serial    straightforward loops, the reference for tests
//   kernels::parallel  OpenMP + blocked loops, used by the library
//
// Activation layout throughout is channel-major [channel][batch][time], so
// one 1-d convolution over a whole batch is a single GEMM after im2col.
// Every parallel kernel partitions output elements across threads and keeps
// the per-element accumulation order fixed, so results do not depend on the
// thread count.

#include <cstdint>
#include <span>

#include "glada/common.hpp"

namespace glada::kernels {

struct ConvGeometry {
  std::size_t channels = 0;  // input channels
  std::size_t batch = 0;
  std::size_t length = 0;    // input time steps
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  // Zero when the padded input is shorter than the kernel.
  std::size_t out_length() const {
    const std::size_t padded = length + 2 * padding;
    return padded < kernel ? 0 : (padded - kernel) / stride + 1;
  }
  std::size_t col_rows() const { return channels * kernel; }
  std::size_t col_cols() const { return batch * out_length(); }
};

struct PoolGeometry {
  std::size_t rows = 0;  // channel * batch
  std::size_t length = 0;
  std::size_t kernel = 2;
  std::size_t stride = 2;
  std::size_t padding = 1;

  std::size_t out_length() const {
    const std::size_t padded = length + 2 * padding;
    return padded < kernel ? 0 : (padded - kernel) / stride + 1;
  }
};

namespace serial {
// c[m,n] = a[m,k] * b[k,n], or c += a*b when accumulate is set.
void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const Real> a,
          std::span<const Real> b, std::span<Real> c, bool accumulate);
void transpose(std::size_t rows, std::size_t cols, std::span<const Real> in, std::span<Real> out);
// x[channels][batch][length] -> cols[channels*kernel][batch*out_length]
void im2col(const ConvGeometry& g, std::span<const Real> x, std::span<Real> cols);
// Adjoint of im2col; overwrites dx.
void col2im(const ConvGeometry& g, std::span<const Real> cols, std::span<Real> dx);
// Padded positions act as -inf. argmax records the winning input index per output.
void maxpool_forward(const PoolGeometry& g, std::span<const Real> x, std::span<Real> y,
                     std::span<std::int32_t> argmax);
// Overwrites dx.
void maxpool_backward(const PoolGeometry& g, std::span<const Real> dy,
                      std::span<const std::int32_t> argmax, std::span<Real> dx);
// Per-row mean and biased variance of x[rows][cols].
void row_moments(std::size_t rows, std::size_t cols, std::span<const Real> x, std::span<Real> mean,
                 std::span<Real> var);
// d[i,j] = |x_i - x_j|^2 for the rows of x[n][dim].
void pairwise_sq_distances(std::size_t n, std::size_t dim, std::span<const Real> x,
                           std::span<Real> d);
}  // namespace serial

// Same contracts as serial::.
namespace parallel {
// c[m,n] = a[m,k] * b[k,n], or c += a*b when accumulate is set.
void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const Real> a,
          std::span<const Real> b, std::span<Real> c, bool accumulate);
void transpose(std::size_t rows, std::size_t cols, std::span<const Real> in, std::span<Real> out);
// x[channels][batch][length] -> cols[channels*kernel][batch*out_length]
void im2col(const ConvGeometry& g, std::span<const Real> x, std::span<Real> cols);
// Adjoint of im2col; overwrites dx.
void col2im(const ConvGeometry& g, std::span<const Real> cols, std::span<Real> dx);
// Padded positions act as -inf. argmax records the winning input index per output.
void maxpool_forward(const PoolGeometry& g, std::span<const Real> x, std::span<Real> y,
                     std::span<std::int32_t> argmax);
// Overwrites dx.
void maxpool_backward(const PoolGeometry& g, std::span<const Real> dy,
                      std::span<const std::int32_t> argmax, std::span<Real> dx);
// Per-row mean and biased variance of x[rows][cols].
void row_moments(std::size_t rows, std::size_t cols, std::span<const Real> x, std::span<Real> mean,
                 std::span<Real> var);
// d[i,j] = |x_i - x_j|^2 for the rows of x[n][dim].
void pairwise_sq_distances(std::size_t n, std::size_t dim, std::span<const Real> x,
                           std::span<Real> d);
}  // namespace parallel

}  // namespace glada::kernels
