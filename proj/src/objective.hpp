// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "diversity.hpp"
#include "model.hpp"
#include "vec.hpp"

namespace dpl {

// One gradient array per learnable parameter group, shape-matched to
// ModelState.
struct GradientBuffer {
  Matrix proj_weight;
  Vector proj_bias;
  Matrix prototypes;
  Matrix vn_w1;
  Vector vn_b1;
  Matrix vn_w2;
  Vector vn_b2;
  double a = 0.0;
  double b = 0.0;

  static GradientBuffer zeros_like(const ModelState& model);

  /// this += scale * other.
  void accumulate(const GradientBuffer& other, double scale);
  void scale_by(double s);
  bool all_finite() const;
  double max_abs() const;
};

struct ObjectiveConfig {
  double alpha = 10.0;
  double radius = 1.0;
  bool detach_prototype_in_sampling = false;
};

// A raw training example: the unprojected feature and its label.
struct TrainingExample {
  const Vector* feature = nullptr;
  std::uint32_t label = 0;
};

/// -log softmax(distance_logits(z))[label], computed via log-sum-exp.
double ce_loss(const ModelState& model, std::span<const double> z,
               std::uint32_t label);

/// ce + ortho + alpha * match.
double total_loss(double ce, double ortho, double match, double alpha);

// Analytic gradients of each loss component, batch-mean reduction for ce
// and match, ortho counted once. Values and gradients are unscaled: the
// match component is NOT multiplied by alpha here.
struct ComponentGradients {
  double ce = 0.0;
  double ortho = 0.0;
  double match = 0.0;
  GradientBuffer ce_grads;
  GradientBuffer ortho_grads;
  GradientBuffer match_grads;
};

ComponentGradients backward_components(const ModelState& model,
                                       std::span<const TrainingExample> batch,
                                       const SampleSetMap& samplesets,
                                       const ObjectiveConfig& config);

struct BackwardResult {
  LossBreakdown losses;
  GradientBuffer grads;
};

/// Composite backward: gradients of ce + ortho + alpha * match.
BackwardResult backward(const ModelState& model,
                        std::span<const TrainingExample> batch,
                        const SampleSetMap& samplesets,
                        const ObjectiveConfig& config);

}  // namespace dpl
