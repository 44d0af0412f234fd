#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glada {

// All training and evaluation runs in double precision; files store f32le.
using Real = double;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Array dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure (missing file, unwritable path, short read).
class IoError : public Error {
 public:
  using Error::Error;
};

// File content is readable but violates the container format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Precondition violated by the caller (bad argument value).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, Real fill = 0) : rows(r), cols(c), data(r * c, fill) {}

  Real& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<Real> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const Real> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// Dense 3-d array, C order [d0][d1][d2]. Time series batches use [sample][channel][time].
struct Tensor3 {
  std::size_t d0 = 0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::vector<Real> data;

  Tensor3() = default;
  Tensor3(std::size_t a, std::size_t b, std::size_t c, Real fill = 0)
      : d0(a), d1(b), d2(c), data(a * b * c, fill) {}

  Real& operator()(std::size_t i, std::size_t j, std::size_t k) { return data[(i * d1 + j) * d2 + k]; }
  Real operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * d1 + j) * d2 + k];
  }

  std::span<Real> slab(std::size_t i) { return {data.data() + i * d1 * d2, d1 * d2}; }
  std::span<const Real> slab(std::size_t i) const { return {data.data() + i * d1 * d2, d1 * d2}; }

  bool operator==(const Tensor3&) const = default;
};

bool all_finite(std::span<const Real> values);

// Index of the largest element; ties resolve to the smallest index.
std::size_t argmax(std::span<const Real> values);

// splitmix64 finalizer; used to derive independent RNG streams from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace glada
