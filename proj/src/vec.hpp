// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dpl {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Kept deliberately plain: the model is
// small and every hot loop is written out by hand.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return std::span<double>(values.data() + r * cols, cols);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values.data() + r * cols, cols);
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);

/// Euclidean distance ||u - v||_2. Throws DimensionError on length mismatch.
double euclidean_distance(std::span<const double> u, std::span<const double> v);

/// Numerically stable softmax (max subtraction). Throws on empty input.
Vector softmax(const Vector& v);

/// Returns v / ||v||_2. Throws NumericError on the zero vector.
Vector l2_normalized(const Vector& v);

bool all_finite(std::span<const double> v);

/// Central finite difference (f(x+h e_i) - f(x-h e_i)) / (2h) per coordinate.
/// Throws NumericError if f evaluates to a non-finite value.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& x, double h);

}  // namespace dpl
