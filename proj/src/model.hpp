// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "rng.hpp"
#include "vec.hpp"

namespace dpl {

// Linear map from raw feature space into prototype space: z = W r + bias.
struct ProjectorParams {
  Matrix weight;  // d x d_in
  Vector bias;    // d
};

// One unit-norm prototype row per class.
struct PrototypeBank {
  Matrix c;  // num_classes x d
};

// Two-layer MLP producing a per-coordinate variance for a prototype:
// sigma^2 = softplus(w2 relu(w1 c + b1) + b2) + sigma2_floor. The softplus
// plus floor keeps every coordinate strictly positive, which the normalized
// inference divides by.
struct VarianceNet {
  Matrix w1;  // hidden x d
  Vector b1;  // hidden
  Matrix w2;  // d x hidden
  Vector b2;  // d
  double sigma2_floor = 1e-3;
};

struct ScaleParams {
  double a = 1.0;
  double b = 0.0;
};

struct ModelDims {
  std::size_t d_in = 0;
  std::size_t d = 0;
  std::size_t num_classes = 0;
  std::size_t hidden = 0;
};

struct ModelState {
  ModelDims dims;
  ProjectorParams projector;
  PrototypeBank prototypes;
  VarianceNet variance_net;
  ScaleParams scales;
  std::uint64_t step = 0;
};

/// Weights ~ N(0, 1/fan_in), biases zero, prototypes standard normal rows
/// renormalized to unit length, a = 1, b = 0.
ModelState init_model(std::size_t d_in, std::size_t d, std::size_t num_classes,
                      SeededRng& rng, double sigma2_floor = 1e-3);

/// z = W r + bias.
Vector project(const ModelState& model, std::span<const double> feature);

/// Distances ||z - c_i|| for every class.
Vector prototype_distances(const ModelState& model, std::span<const double> z);

/// Pre-softmax scores -a ||z - c_i|| + b.
Vector distance_logits(const ModelState& model, std::span<const double> z);

/// sigma^2 vector for class i; strictly positive in every coordinate.
Vector variance_of(const ModelState& model, std::size_t class_index);

/// Divides every prototype row by its norm; throws NumericError on a zero
/// row (training cannot continue from there).
void renormalize_prototypes(ModelState& model);

/// max_i | ||c_i|| - 1 |.
double max_prototype_norm_deviation(const ModelState& model);

/// Shape-consistency check; throws DimensionError on any mismatch.
void validate_shapes(const ModelState& model);

double softplus(double x);
double sigmoid(double x);

}  // namespace dpl
