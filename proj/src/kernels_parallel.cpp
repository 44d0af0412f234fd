#include <algorithm>
#include <limits>
#include <vector>

#include "glada/kernels.hpp"

namespace glada::kernels::parallel {

namespace {

// Register tile of the GEMM micro-kernel: 8 rows x 16 columns of C.
constexpr std::size_t kTileRows = 8;
constexpr std::size_t kTileCols = 16;

// Shared index arithmetic for im2col/col2im: maps (output position, tap) to the
// input position, or -1 inside the zero padding.
inline std::ptrdiff_t source_index(const ConvGeometry& g, std::size_t t, std::size_t q) {
  const auto src =
      static_cast<std::ptrdiff_t>(t * g.stride + q) - static_cast<std::ptrdiff_t>(g.padding);
  return (src >= 0 && src < static_cast<std::ptrdiff_t>(g.length)) ? src : -1;
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const Real> a,
          std::span<const Real> b, std::span<Real> c, bool accumulate) {
  const Real* __restrict A = a.data();
  const Real* __restrict B = b.data();
  Real* __restrict C = c.data();
  const std::size_t m_full = m / kTileRows * kTileRows;
  const std::size_t n_full = n / kTileCols * kTileCols;
  const auto panels = static_cast<std::ptrdiff_t>(n_full / kTileCols);

  // Full tiles: each thread owns column panels and packs its panel of B once.
#pragma omp parallel
  {
    std::vector<Real> pack(k * kTileCols);
#pragma omp for schedule(static)
    for (std::ptrdiff_t panel = 0; panel < panels; ++panel) {
      const std::size_t j0 = static_cast<std::size_t>(panel) * kTileCols;
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < kTileCols; ++j) pack[p * kTileCols + j] = B[p * n + j0 + j];
      for (std::size_t i0 = 0; i0 < m_full; i0 += kTileRows) {
        Real acc[kTileRows][kTileCols];
        for (std::size_t r = 0; r < kTileRows; ++r)
          for (std::size_t j = 0; j < kTileCols; ++j)
            acc[r][j] = accumulate ? C[(i0 + r) * n + j0 + j] : Real{0};
        for (std::size_t p = 0; p < k; ++p) {
          const Real* bp = pack.data() + p * kTileCols;
          for (std::size_t r = 0; r < kTileRows; ++r) {
            const Real av = A[(i0 + r) * k + p];
#pragma omp simd
            for (std::size_t j = 0; j < kTileCols; ++j) acc[r][j] += av * bp[j];
          }
        }
        for (std::size_t r = 0; r < kTileRows; ++r)
          for (std::size_t j = 0; j < kTileCols; ++j) C[(i0 + r) * n + j0 + j] = acc[r][j];
      }
    }
  }

  // Ragged edges: rows past m_full (all columns) and columns past n_full.
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i < m_full ? n_full : 0; j < n; ++j) {
      Real s = accumulate ? C[i * n + j] : Real{0};
      for (std::size_t p = 0; p < k; ++p) s += A[i * k + p] * B[p * n + j];
      C[i * n + j] = s;
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, std::span<const Real> in, std::span<Real> out) {
  constexpr std::size_t tile = 32;
  const auto tiles = static_cast<std::ptrdiff_t>((rows + tile - 1) / tile);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ti = 0; ti < tiles; ++ti) {
    const std::size_t i0 = static_cast<std::size_t>(ti) * tile;
    const std::size_t i1 = std::min(i0 + tile, rows);
    for (std::size_t j0 = 0; j0 < cols; j0 += tile) {
      const std::size_t j1 = std::min(j0 + tile, cols);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) out[j * rows + i] = in[i * cols + j];
    }
  }
}

void im2col(const ConvGeometry& g, std::span<const Real> x, std::span<Real> cols) {
  const std::size_t lo = g.out_length();
  const auto rows = static_cast<std::ptrdiff_t>(g.col_rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t c = static_cast<std::size_t>(r) / g.kernel;
    const std::size_t q = static_cast<std::size_t>(r) % g.kernel;
    Real* out = cols.data() + static_cast<std::size_t>(r) * g.batch * lo;
    for (std::size_t b = 0; b < g.batch; ++b) {
      const Real* xin = x.data() + (c * g.batch + b) * g.length;
      for (std::size_t t = 0; t < lo; ++t) {
        const auto src = source_index(g, t, q);
        out[b * lo + t] = src < 0 ? Real{0} : xin[src];
      }
    }
  }
}

void col2im(const ConvGeometry& g, std::span<const Real> cols, std::span<Real> dx) {
  const std::size_t lo = g.out_length();
  const auto channels = static_cast<std::ptrdiff_t>(g.channels);
  // Each thread owns whole input channels; the (q, b, t) order matches serial::col2im.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < channels; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    Real* dxc = dx.data() + c * g.batch * g.length;
    std::fill(dxc, dxc + g.batch * g.length, Real{0});
    for (std::size_t q = 0; q < g.kernel; ++q) {
      const Real* in = cols.data() + (c * g.kernel + q) * g.batch * lo;
      for (std::size_t b = 0; b < g.batch; ++b) {
        Real* dxb = dxc + b * g.length;
        for (std::size_t t = 0; t < lo; ++t) {
          const auto src = source_index(g, t, q);
          if (src >= 0) dxb[src] += in[b * lo + t];
        }
      }
    }
  }
}

void maxpool_forward(const PoolGeometry& g, std::span<const Real> x, std::span<Real> y,
                     std::span<std::int32_t> argmax) {
  const std::size_t lo = g.out_length();
  const auto rows = static_cast<std::ptrdiff_t>(g.rows);
  const auto len = static_cast<std::ptrdiff_t>(g.length);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const Real* xr = x.data() + r * len;
    for (std::size_t t = 0; t < lo; ++t) {
      Real best = -std::numeric_limits<Real>::infinity();
      std::int32_t where = -1;
      const auto start =
          static_cast<std::ptrdiff_t>(t * g.stride) - static_cast<std::ptrdiff_t>(g.padding);
      for (std::size_t q = 0; q < g.kernel; ++q) {
        const std::ptrdiff_t src = start + static_cast<std::ptrdiff_t>(q);
        if (src < 0 || src >= len) continue;
        if (where < 0 || xr[src] > best) {
          best = xr[src];
          where = static_cast<std::int32_t>(src);
        }
      }
      y[static_cast<std::size_t>(r) * lo + t] = best;
      argmax[static_cast<std::size_t>(r) * lo + t] = where;
    }
  }
}

void maxpool_backward(const PoolGeometry& g, std::span<const Real> dy,
                      std::span<const std::int32_t> argmax, std::span<Real> dx) {
  const std::size_t lo = g.out_length();
  const auto rows = static_cast<std::ptrdiff_t>(g.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ri = 0; ri < rows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    Real* dxr = dx.data() + r * g.length;
    std::fill(dxr, dxr + g.length, Real{0});
    for (std::size_t t = 0; t < lo; ++t) dxr[argmax[r * lo + t]] += dy[r * lo + t];
  }
}

void row_moments(std::size_t rows, std::size_t cols, std::span<const Real> x, std::span<Real> mean,
                 std::span<Real> var) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ri = 0; ri < nrows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const Real* xr = x.data() + r * cols;
    Real s = 0;
    for (std::size_t j = 0; j < cols; ++j) s += xr[j];
    const Real mu = s / static_cast<Real>(cols);
    Real ss = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      const Real d = xr[j] - mu;
      ss += d * d;
    }
    mean[r] = mu;
    var[r] = ss / static_cast<Real>(cols);
  }
}

void pairwise_sq_distances(std::size_t n, std::size_t dim, std::span<const Real> x,
                           std::span<Real> d) {
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t ii = 0; ii < nn; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Real* xi = x.data() + i * dim;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* xj = x.data() + j * dim;
      Real s = 0;
      for (std::size_t q = 0; q < dim; ++q) {
        const Real diff = xi[q] - xj[q];
        s += diff * diff;
      }
      d[i * n + j] = s;
    }
  }
}

}  // namespace glada::kernels::parallel
