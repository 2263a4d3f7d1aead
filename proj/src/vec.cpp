// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "vec.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace dpl {

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double euclidean_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DimensionError("euclidean_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Vector softmax(const Vector& v) {
  if (v.empty())
    throw DimensionError("softmax: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

Vector l2_normalized(const Vector& v) {
  const double n = l2_norm(v);
  if (n == 0.0)
    throw NumericError("l2_normalized: zero vector has no direction");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& x, double h) {
  if (h <= 0.0)
    throw ConfigError("finite_diff_grad: h must be positive");
  Vector grad(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: non-finite function value");
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace dpl
