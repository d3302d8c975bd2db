#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace framelens {

/// Dense row-major matrix used for label and score tables.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(data).subspan(r * cols, cols); }
  std::span<const T> row(std::size_t r) const { return std::span<const T>(data).subspan(r * cols, cols); }

  std::vector<T> column(std::size_t c) const {
    std::vector<T> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
    return out;
  }

  /// Rows picked by index, in the given order (repeats allowed).
  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto src = row(idx[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  bool operator==(const Matrix&) const = default;
};

using BinaryMatrix = Matrix<std::uint8_t>;
using RealMatrix = Matrix<double>;

}  // namespace framelens
