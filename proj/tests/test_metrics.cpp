// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <doctest.h>

#include "errors.hpp"
#include "generator.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "trainer.hpp"

using namespace dpl;

namespace {

InferenceTrace trace_for(std::uint32_t cls, std::size_t n, double conf) {
  InferenceTrace t;
  t.probabilities.assign(n, (1.0 - conf) / static_cast<double>(n - 1));
  t.probabilities[cls] = conf;
  return t;
}

}  // namespace

TEST_CASE("confusion matrix") {
  const std::vector<std::uint32_t> labels{0, 1, 2, 1};
  const std::vector<std::uint32_t> preds{0, 1, 2, 1};
  const ConfusionMatrix cm = confusion_matrix(preds, labels, 3);
  CHECK(cm.total() == 4);
  CHECK(cm.diagonal() == 4);

  const ConfusionMatrix empty =
      confusion_matrix(std::vector<std::uint32_t>{},
                       std::vector<std::uint32_t>{}, 3);
  CHECK(empty.total() == 0);

  const std::vector<std::uint32_t> one_label{1};
  const std::vector<std::uint32_t> one_pred{0};
  const ConfusionMatrix single = confusion_matrix(one_pred, one_label, 2);
  CHECK(single.at(1, 0) == 1);
  CHECK(single.total() == 1);

  CHECK_THROWS_AS(confusion_matrix(one_pred, labels, 3), ConfigError);
  const std::vector<std::uint32_t> big{7};
  CHECK_THROWS_AS(confusion_matrix(big, one_label, 3), IndexError);
}

TEST_CASE("metrics report reference values") {
  std::vector<std::uint32_t> labels, preds;
  for (int i = 0; i < 90; ++i) labels.push_back(0);
  for (int i = 0; i < 10; ++i) labels.push_back(1);
  preds.assign(100, 0);

  const MetricsReport report =
      metrics_report(confusion_matrix(preds, labels, 2), "biased");
  CHECK(report.micro_recall == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(report.mean_recall == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(report.harmonic_f ==
        doctest::Approx(0.6428571428571429).epsilon(1e-12));

  const MetricsReport with_absent =
      metrics_report(confusion_matrix(preds, labels, 4), "biased");
  CHECK(with_absent.present_classes == std::vector<std::uint32_t>{0, 1});
  CHECK(std::isnan(with_absent.per_class_recall[2]));
  CHECK(std::isnan(with_absent.per_class_recall[3]));

  CHECK_THROWS_AS(metrics_report(ConfusionMatrix(3), "biased"), ConfigError);
}

TEST_CASE("harmonic mean bounds") {
  SeededRng rng(1);
  for (int t = 0; t < 200; ++t) {
    const double x = 0.005 + 0.99 * rng.next_uniform();
    const double y = 0.005 + 0.99 * rng.next_uniform();
    const double harm = 2.0 * x * y / (x + y);
    CHECK(harm <= 0.5 * (x + y) + 1e-12);
    CHECK(harm <= std::sqrt(x * y) + 1e-12);
  }
}

TEST_CASE("grouped top-k recall") {
  Dataset three;
  three.num_classes = 2;
  three.feature_dim = 1;
  std::vector<InferenceTrace> traces;
  for (int i = 0; i < 3; ++i) {
    three.instances.push_back({static_cast<std::uint64_t>(i), 0, 1, {0.0}});
    traces.push_back(trace_for(1, 2, 0.9));
  }
  CHECK(recall_at_k_grouped(three, traces, 5) == 1.0);

  Dataset ten;
  ten.num_classes = 2;
  ten.feature_dim = 1;
  std::vector<InferenceTrace> ten_traces;
  for (int i = 0; i < 10; ++i) {
    ten.instances.push_back({static_cast<std::uint64_t>(i), 0, 1, {0.0}});
    ten_traces.push_back(trace_for(1, 2, 0.9));
  }
  CHECK(recall_at_k_grouped(ten, ten_traces, 5) == 0.5);

  std::vector<InferenceTrace> wrong(10, trace_for(0, 2, 0.9));
  CHECK(recall_at_k_grouped(ten, wrong, 5) == 0.0);

  CHECK_THROWS_AS(recall_at_k_grouped(ten, ten_traces, 0), ConfigError);

  // Ranking keeps the most confident instances: 2 correct-confident and
  // 2 wrong-unconfident in one group, K = 2 keeps the confident pair.
  Dataset ranked;
  ranked.num_classes = 2;
  ranked.feature_dim = 1;
  std::vector<InferenceTrace> mixed;
  for (int i = 0; i < 2; ++i) {
    ranked.instances.push_back({static_cast<std::uint64_t>(i), 0, 1, {0.0}});
    mixed.push_back(trace_for(1, 2, 0.95));
  }
  for (int i = 2; i < 4; ++i) {
    ranked.instances.push_back({static_cast<std::uint64_t>(i), 0, 1, {0.0}});
    mixed.push_back(trace_for(0, 2, 0.6));
  }
  CHECK(recall_at_k_grouped(ranked, mixed, 2) == 0.5);
}

TEST_CASE("metrics json round trip is lossless") {
  std::vector<std::uint32_t> labels{0, 0, 1, 2, 2, 2};
  std::vector<std::uint32_t> preds{0, 1, 1, 2, 0, 2};
  MetricsReport report =
      metrics_report(confusion_matrix(preds, labels, 4), "unbiased");
  report.recall_at_k[5] = 1.0 / 3.0;

  const MetricsReport back = MetricsReport::from_json(report.to_json());
  CHECK(back.mode == report.mode);
  CHECK(back.micro_recall == report.micro_recall);
  CHECK(back.mean_recall == report.mean_recall);
  CHECK(back.harmonic_f == report.harmonic_f);
  CHECK(back.present_classes == report.present_classes);
  CHECK(back.recall_at_k == report.recall_at_k);
  CHECK(back.confusion.counts == report.confusion.counts);
  for (std::size_t i = 0; i < report.per_class_recall.size(); ++i) {
    if (std::isnan(report.per_class_recall[i]))
      CHECK(std::isnan(back.per_class_recall[i]));
    else
      CHECK(back.per_class_recall[i] == report.per_class_recall[i]);
  }
  CHECK(back.to_json() == report.to_json());
}

TEST_CASE("evaluate and compare-modes on a trained model") {
  GeneratorSpec spec;
  spec.fine_means = {{2.0, 0.0, 0.0, 0.0},
                     {0.0, 2.0, 0.0, 0.0},
                     {0.0, 0.0, 2.0, 0.0}};
  spec.fine_stddev = {0.25, 0.25, 0.25};
  spec.fine_counts = {60, 30, 20};
  spec.fine_to_coarse = {0, 1, 2};
  spec.seed = 6;
  spec.group_size = 5;
  const Dataset ds = generate_synthetic(spec);

  RunConfig config;
  config.d_in = 4;
  config.d = 4;
  config.num_classes = 3;
  config.steps = 400;
  config.seed = 8;
  config.log_interval = 100;
  const TrainResult result = train(config, ds);

  const MetricsReport biased =
      evaluate(result.model, ds, InferenceMode::Biased, 4);
  CHECK(biased.mode == "biased");
  CHECK(biased.micro_recall >= 0.0);
  CHECK(biased.micro_recall <= 1.0);
  CHECK(biased.recall_at_k.count(4) == 1);
  CHECK(biased.confusion.total() == ds.size());

  // Easy separable blobs: training should classify most of them.
  CHECK(biased.micro_recall > 0.8);

  const std::string cmp = compare_modes_json(result.model, ds, 4);
  CHECK(cmp.find("\"biased\"") != std::string::npos);
  CHECK(cmp.find("\"unbiased\"") != std::string::npos);
  CHECK(cmp.find("per_class_recall_delta") != std::string::npos);
  CHECK(cmp.find("\"confusion\"") != std::string::npos);

  // Shape mismatches are data errors.
  GeneratorSpec wrong = spec;
  wrong.fine_means = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  const Dataset bad = generate_synthetic(wrong);
  CHECK_THROWS_AS(evaluate(result.model, bad, InferenceMode::Biased),
                  FormatError);
}

TEST_CASE("sigma-one comparison equalizes the two modes") {
  SeededRng rng(10);
  ModelState m = init_model(5, 4, 3, rng);
  // Zero the variance net and pick b2 so softplus(b2) + floor == 1.
  m.variance_net.w1 = Matrix(4, 4, 0.0);
  m.variance_net.b1 = Vector(4, 0.0);
  m.variance_net.w2 = Matrix(4, 4, 0.0);
  const double b2 = std::log(std::exp(1.0 - 1e-3) - 1.0);
  m.variance_net.b2 = Vector(4, b2);
  for (double v : variance_of(m, 0))
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  GeneratorSpec spec;
  spec.fine_means = {{3.0, 0.0, 0.0, 0.0, 0.0},
                     {0.0, 3.0, 0.0, 0.0, 0.0},
                     {0.0, 0.0, 3.0, 0.0, 0.0}};
  spec.fine_stddev = {0.2, 0.2, 0.2};
  spec.fine_counts = {20, 20, 20};
  spec.fine_to_coarse = {0, 1, 2};
  spec.seed = 12;
  const Dataset ds = generate_synthetic(spec);

  const MetricsReport biased = evaluate(m, ds, InferenceMode::Biased);
  const MetricsReport unbiased = evaluate(m, ds, InferenceMode::Unbiased);
  CHECK(biased.confusion.counts == unbiased.confusion.counts);
  CHECK(biased.micro_recall == unbiased.micro_recall);
  CHECK(biased.mean_recall == unbiased.mean_recall);
}
