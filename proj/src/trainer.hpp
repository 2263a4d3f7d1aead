// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "diversity.hpp"
#include "model.hpp"
#include "objective.hpp"

namespace dpl {

struct RunConfig {
  std::size_t d_in = 128;
  std::size_t d = 128;
  std::size_t num_classes = 0;  // 0: take from the dataset
  double alpha = 10.0;
  std::size_t n_samples = 20;  // N
  double radius = 1.0;         // R
  double lr = 0.01;
  double momentum = 0.0;
  std::size_t batch_size = 3;
  std::size_t steps = 60000;
  std::uint64_t seed = 1;
  double sigma2_floor = 1e-3;
  bool detach_prototype_in_sampling = false;
  std::size_t log_interval = 500;

  /// Desk-scale preset: d_in=64, d=16, 5000 steps, everything else at the
  /// defaults above. Finishes in seconds on one core.
  static RunConfig desk_default();

  void validate() const;

  /// Parses a config document; {"preset":"desk"} selects the desk preset,
  /// explicit fields override it.
  static RunConfig from_json(const std::string& text);
  std::string to_json() const;
};

struct TrainRecord {
  std::uint64_t step = 0;
  LossBreakdown losses;
  double proto_norm_max_dev = 0.0;
};

struct TrainHistory {
  std::vector<TrainRecord> records;
  std::string to_json() const;
};

struct TrainResult {
  ModelState model;
  TrainHistory history;
};

// Plain SGD with optional momentum; prototype rows are renormalized after
// every update so the unit-norm constraint holds as a hard invariant.
class SgdOptimizer {
 public:
  SgdOptimizer(const ModelState& model, double lr, double momentum);
  void step(ModelState& model, const GradientBuffer& grads);

 private:
  double lr_;
  double momentum_;
  GradientBuffer velocity_;
};

/// Deterministic training: the result is a pure function of
/// (config, dataset). Batches are drawn uniformly with replacement; fresh
/// sample sets are drawn each step for the classes present in the batch.
TrainResult train(const RunConfig& config, const Dataset& dataset);

}  // namespace dpl
