// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "inference.hpp"
#include "model.hpp"

namespace dpl {

struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;  // row = true class, col = predicted

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t n)
      : num_classes(n), counts(n * n, 0) {}

  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * num_classes + pred];
  }
  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * num_classes + pred];
  }
  std::uint64_t total() const;
  std::uint64_t diagonal() const;
  std::uint64_t row_sum(std::size_t truth) const;
};

ConfusionMatrix confusion_matrix(std::span<const std::uint32_t> preds,
                                 std::span<const std::uint32_t> labels,
                                 std::size_t num_classes);

// Classifier-level stand-ins for ranked recall: micro recall plays R,
// mean per-class recall plays mR, and harmonic_f combines the two.
struct MetricsReport {
  std::string mode;
  double micro_recall = 0.0;
  double mean_recall = 0.0;
  double harmonic_f = 0.0;
  // NaN marks classes absent from the evaluation split.
  std::vector<double> per_class_recall;
  std::vector<std::uint32_t> present_classes;
  std::map<int, double> recall_at_k;
  ConfusionMatrix confusion;

  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

/// Fails on an empty matrix. Classes with no true instances are excluded
/// from mean_recall and from present_classes.
MetricsReport metrics_report(const ConfusionMatrix& cm, const std::string& mode);

/// Within each group: rank by top predicted probability, keep the K most
/// confident instances, count correct predictions among them, divide by
/// the group's instance count; then average over groups.
double recall_at_k_grouped(const Dataset& dataset,
                           std::span<const InferenceTrace> traces, int k);

/// Full evaluation of a model over a dataset in one inference mode.
MetricsReport evaluate(const ModelState& model, const Dataset& dataset,
                       InferenceMode mode, std::optional<int> topk = {});

/// Side-by-side evaluation of both modes on identical inputs, as a JSON
/// document with per-class recall deltas.
std::string compare_modes_json(const ModelState& model, const Dataset& dataset,
                               std::optional<int> topk = {});

}  // namespace dpl
