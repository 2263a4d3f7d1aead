// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "errors.hpp"

namespace dpl {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t acc = 0;
  for (auto c : counts) acc += c;
  return acc;
}

std::uint64_t ConfusionMatrix::diagonal() const {
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < num_classes; ++i) acc += at(i, i);
  return acc;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t acc = 0;
  for (std::size_t p = 0; p < num_classes; ++p) acc += at(truth, p);
  return acc;
}

ConfusionMatrix confusion_matrix(std::span<const std::uint32_t> preds,
                                 std::span<const std::uint32_t> labels,
                                 std::size_t num_classes) {
  if (preds.size() != labels.size())
    throw ConfigError("confusion_matrix: preds and labels differ in length");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= num_classes || labels[i] >= num_classes)
      throw IndexError("confusion_matrix: class index out of range at " +
                       std::to_string(i));
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

MetricsReport metrics_report(const ConfusionMatrix& cm,
                             const std::string& mode) {
  const std::uint64_t total = cm.total();
  if (total == 0)
    throw ConfigError("metrics_report: empty confusion matrix");

  MetricsReport report;
  report.mode = mode;
  report.confusion = cm;
  report.micro_recall =
      static_cast<double>(cm.diagonal()) / static_cast<double>(total);

  report.per_class_recall.assign(cm.num_classes,
                                 std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  for (std::size_t t = 0; t < cm.num_classes; ++t) {
    const std::uint64_t row = cm.row_sum(t);
    if (row == 0) continue;  // absent from the split
    const double recall =
        static_cast<double>(cm.at(t, t)) / static_cast<double>(row);
    report.per_class_recall[t] = recall;
    report.present_classes.push_back(static_cast<std::uint32_t>(t));
    sum += recall;
  }
  if (report.present_classes.empty())
    throw ConfigError("metrics_report: no class has instances");
  report.mean_recall = sum / static_cast<double>(report.present_classes.size());

  const double denom = report.micro_recall + report.mean_recall;
  report.harmonic_f =
      denom > 0.0 ? 2.0 * report.micro_recall * report.mean_recall / denom
                  : 0.0;
  return report;
}

double recall_at_k_grouped(const Dataset& dataset,
                           std::span<const InferenceTrace> traces, int k) {
  if (k < 1)
    throw ConfigError("recall_at_k_grouped: K must be >= 1");
  if (traces.size() != dataset.instances.size())
    throw ConfigError("recall_at_k_grouped: one trace per instance required");

  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i)
    groups[dataset.instances[i].group].push_back(i);

  double acc = 0.0;
  for (auto& [group_id, members] : groups) {
    std::stable_sort(members.begin(), members.end(),
                     [&traces](std::size_t lhs, std::size_t rhs) {
                       const auto& lp = traces[lhs].probabilities;
                       const auto& rp = traces[rhs].probabilities;
                       return *std::max_element(lp.begin(), lp.end()) >
                              *std::max_element(rp.begin(), rp.end());
                     });
    const std::size_t keep =
        std::min(members.size(), static_cast<std::size_t>(k));
    std::uint64_t correct = 0;
    for (std::size_t r = 0; r < keep; ++r) {
      const std::size_t idx = members[r];
      if (predict(traces[idx]) == dataset.instances[idx].label) ++correct;
    }
    acc += static_cast<double>(correct) / static_cast<double>(members.size());
  }
  return acc / static_cast<double>(groups.size());
}

MetricsReport evaluate(const ModelState& model, const Dataset& dataset,
                       InferenceMode mode, std::optional<int> topk) {
  validate_shapes(model);
  dataset.validate();
  // A checkpoint that does not fit the data is a data problem, not a usage
  // problem; callers map it to the data/format exit code.
  if (dataset.feature_dim != model.dims.d_in)
    throw FormatError("evaluate: dataset feature_dim " +
                      std::to_string(dataset.feature_dim) +
                      " does not match checkpoint d_in " +
                      std::to_string(model.dims.d_in));
  if (dataset.num_classes > model.dims.num_classes)
    throw FormatError("evaluate: dataset has more classes than the checkpoint");

  std::vector<InferenceTrace> traces;
  traces.reserve(dataset.instances.size());
  std::vector<std::uint32_t> preds, labels;
  preds.reserve(dataset.instances.size());
  labels.reserve(dataset.instances.size());
  for (const auto& inst : dataset.instances) {
    const Vector z = project(model, inst.feature);
    traces.push_back(run_inference(model, z, mode));
    preds.push_back(predict(traces.back()));
    labels.push_back(inst.label);
  }

  MetricsReport report = metrics_report(
      confusion_matrix(preds, labels, model.dims.num_classes),
      to_string(mode));
  if (topk)
    report.recall_at_k[*topk] = recall_at_k_grouped(dataset, traces, *topk);
  return report;
}

namespace {

nlohmann::json report_to_json_value(const MetricsReport& report) {
  nlohmann::json doc;
  doc["mode"] = report.mode;
  doc["micro_recall"] = report.micro_recall;
  doc["mean_recall"] = report.mean_recall;
  doc["harmonic_f"] = report.harmonic_f;
  doc["per_class_recall"] = nlohmann::json::array();
  for (double r : report.per_class_recall) {
    if (std::isnan(r))
      doc["per_class_recall"].push_back(nullptr);
    else
      doc["per_class_recall"].push_back(r);
  }
  doc["present_classes"] = report.present_classes;
  doc["recall_at_k"] = nlohmann::json::object();
  for (const auto& [k, v] : report.recall_at_k)
    doc["recall_at_k"][std::to_string(k)] = v;
  doc["confusion"] = nlohmann::json::array();
  for (std::size_t t = 0; t < report.confusion.num_classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < report.confusion.num_classes; ++p)
      row.push_back(report.confusion.at(t, p));
    doc["confusion"].push_back(row);
  }
  return doc;
}

MetricsReport report_from_json_value(const nlohmann::json& doc) {
  MetricsReport report;
  report.mode = doc.at("mode").get<std::string>();
  report.micro_recall = doc.at("micro_recall").get<double>();
  report.mean_recall = doc.at("mean_recall").get<double>();
  report.harmonic_f = doc.at("harmonic_f").get<double>();
  for (const auto& v : doc.at("per_class_recall"))
    report.per_class_recall.push_back(
        v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                    : v.get<double>());
  report.present_classes =
      doc.at("present_classes").get<std::vector<std::uint32_t>>();
  for (const auto& [key, value] : doc.at("recall_at_k").items())
    report.recall_at_k[std::stoi(key)] = value.get<double>();
  const auto& cm = doc.at("confusion");
  report.confusion = ConfusionMatrix(cm.size());
  for (std::size_t t = 0; t < cm.size(); ++t)
    for (std::size_t p = 0; p < cm.size(); ++p)
      report.confusion.at(t, p) = cm.at(t).at(p).get<std::uint64_t>();
  return report;
}

}  // namespace

std::string MetricsReport::to_json() const {
  return report_to_json_value(*this).dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  try {
    return report_from_json_value(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics: bad JSON: ") + e.what());
  }
}

std::string compare_modes_json(const ModelState& model, const Dataset& dataset,
                               std::optional<int> topk) {
  const MetricsReport biased =
      evaluate(model, dataset, InferenceMode::Biased, topk);
  const MetricsReport unbiased =
      evaluate(model, dataset, InferenceMode::Unbiased, topk);

  nlohmann::json doc;
  doc["biased"] = report_to_json_value(biased);
  doc["unbiased"] = report_to_json_value(unbiased);
  doc["micro_recall_delta"] = unbiased.micro_recall - biased.micro_recall;
  doc["mean_recall_delta"] = unbiased.mean_recall - biased.mean_recall;
  doc["harmonic_f_delta"] = unbiased.harmonic_f - biased.harmonic_f;
  doc["per_class_recall_delta"] = nlohmann::json::array();
  for (std::size_t i = 0; i < biased.per_class_recall.size(); ++i) {
    const double lhs = biased.per_class_recall[i];
    const double rhs = unbiased.per_class_recall[i];
    if (std::isnan(lhs) || std::isnan(rhs))
      doc["per_class_recall_delta"].push_back(nullptr);
    else
      doc["per_class_recall_delta"].push_back(rhs - lhs);
  }
  return doc.dump(2);
}

}  // namespace dpl
