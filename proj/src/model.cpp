// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace dpl {

double softplus(double x) {
  // log(1 + e^x) without overflow on either side.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

Matrix random_weight(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix m(rows, cols);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(cols));
  for (auto& v : m.values) v = stddev * rng.next_gaussian();
  return m;
}

}  // namespace

ModelState init_model(std::size_t d_in, std::size_t d, std::size_t num_classes,
                      SeededRng& rng, double sigma2_floor) {
  if (d_in == 0 || d == 0 || num_classes == 0)
    throw ConfigError("init_model: all dimensions must be >= 1");
  if (!(sigma2_floor > 0.0))
    throw ConfigError("init_model: sigma2_floor must be positive");

  ModelState model;
  model.dims = ModelDims{d_in, d, num_classes, d};
  model.projector.weight = random_weight(d, d_in, rng);
  model.projector.bias = Vector(d, 0.0);
  model.prototypes.c = random_weight(num_classes, d, rng);
  for (std::size_t i = 0; i < num_classes; ++i) {
    // Redraw in the (practically impossible) case of an all-zero row.
    while (l2_norm(model.prototypes.c.row(i)) == 0.0)
      for (auto& v : model.prototypes.c.row(i)) v = rng.next_gaussian();
  }
  model.variance_net.w1 = random_weight(d, d, rng);
  model.variance_net.b1 = Vector(d, 0.0);
  model.variance_net.w2 = random_weight(d, d, rng);
  model.variance_net.b2 = Vector(d, 0.0);
  model.variance_net.sigma2_floor = sigma2_floor;
  model.scales = ScaleParams{1.0, 0.0};
  model.step = 0;
  renormalize_prototypes(model);
  return model;
}

Vector project(const ModelState& model, std::span<const double> feature) {
  const auto& w = model.projector.weight;
  if (feature.size() != w.cols)
    throw DimensionError("project: feature has dimension " +
                         std::to_string(feature.size()) + ", expected " +
                         std::to_string(w.cols));
  Vector z(w.rows);
  for (std::size_t r = 0; r < w.rows; ++r) {
    double acc = model.projector.bias[r];
    const auto row = w.row(r);
    for (std::size_t cidx = 0; cidx < w.cols; ++cidx)
      acc += row[cidx] * feature[cidx];
    z[r] = acc;
  }
  return z;
}

Vector prototype_distances(const ModelState& model, std::span<const double> z) {
  const auto& c = model.prototypes.c;
  if (z.size() != c.cols)
    throw DimensionError("prototype_distances: z has dimension " +
                         std::to_string(z.size()) + ", expected " +
                         std::to_string(c.cols));
  Vector dist(c.rows);
  for (std::size_t i = 0; i < c.rows; ++i)
    dist[i] = euclidean_distance(z, c.row(i));
  return dist;
}

Vector distance_logits(const ModelState& model, std::span<const double> z) {
  Vector logits = prototype_distances(model, z);
  for (auto& v : logits) v = -model.scales.a * v + model.scales.b;
  return logits;
}

Vector variance_of(const ModelState& model, std::size_t class_index) {
  const auto& vn = model.variance_net;
  const auto& c = model.prototypes.c;
  if (class_index >= c.rows)
    throw IndexError("variance_of: class index " +
                     std::to_string(class_index) + " out of range");
  const auto proto = c.row(class_index);

  Vector hidden(vn.w1.rows);
  for (std::size_t r = 0; r < vn.w1.rows; ++r) {
    double acc = vn.b1[r];
    const auto row = vn.w1.row(r);
    for (std::size_t i = 0; i < vn.w1.cols; ++i) acc += row[i] * proto[i];
    hidden[r] = acc > 0.0 ? acc : 0.0;
  }
  Vector sigma2(vn.w2.rows);
  for (std::size_t r = 0; r < vn.w2.rows; ++r) {
    double acc = vn.b2[r];
    const auto row = vn.w2.row(r);
    for (std::size_t i = 0; i < vn.w2.cols; ++i) acc += row[i] * hidden[i];
    sigma2[r] = softplus(acc) + vn.sigma2_floor;
  }
  return sigma2;
}

void renormalize_prototypes(ModelState& model) {
  auto& c = model.prototypes.c;
  for (std::size_t i = 0; i < c.rows; ++i) {
    const double n = l2_norm(c.row(i));
    if (n == 0.0)
      throw NumericError("renormalize_prototypes: prototype " +
                         std::to_string(i) + " collapsed to the zero vector");
    for (auto& v : c.row(i)) v /= n;
  }
}

double max_prototype_norm_deviation(const ModelState& model) {
  const auto& c = model.prototypes.c;
  double worst = 0.0;
  for (std::size_t i = 0; i < c.rows; ++i)
    worst = std::max(worst, std::abs(l2_norm(c.row(i)) - 1.0));
  return worst;
}

void validate_shapes(const ModelState& model) {
  const auto& dims = model.dims;
  auto expect = [](bool ok, const char* what) {
    if (!ok) throw DimensionError(std::string("model shape mismatch: ") + what);
  };
  expect(dims.d_in > 0 && dims.d > 0 && dims.num_classes > 0 && dims.hidden > 0,
         "zero dimension");
  expect(model.projector.weight.rows == dims.d &&
             model.projector.weight.cols == dims.d_in,
         "projector weight");
  expect(model.projector.bias.size() == dims.d, "projector bias");
  expect(model.prototypes.c.rows == dims.num_classes &&
             model.prototypes.c.cols == dims.d,
         "prototype bank");
  expect(model.variance_net.w1.rows == dims.hidden &&
             model.variance_net.w1.cols == dims.d,
         "variance net w1");
  expect(model.variance_net.b1.size() == dims.hidden, "variance net b1");
  expect(model.variance_net.w2.rows == dims.d &&
             model.variance_net.w2.cols == dims.hidden,
         "variance net w2");
  expect(model.variance_net.b2.size() == dims.d, "variance net b2");
  expect(model.variance_net.sigma2_floor > 0.0, "sigma2 floor");
}

}  // namespace dpl
