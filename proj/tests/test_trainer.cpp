// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <doctest.h>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "rng.hpp"
#include "trainer.hpp"

using namespace dpl;

namespace {

Dataset three_blob_dataset() {
  GeneratorSpec spec;
  spec.fine_means = {{2.0, 0.0, 0.0, 0.0},
                     {0.0, 2.0, 0.0, 0.0},
                     {0.0, 0.0, 2.0, 0.0}};
  spec.fine_stddev = {0.3, 0.3, 0.3};
  spec.fine_counts = {60, 25, 15};
  spec.fine_to_coarse = {0, 1, 2};
  spec.seed = 5;
  return generate_synthetic(spec);
}

RunConfig small_config() {
  RunConfig config;
  config.d_in = 4;
  config.d = 4;
  config.num_classes = 3;
  config.steps = 250;
  config.log_interval = 50;
  config.seed = 17;
  return config;
}

}  // namespace

TEST_CASE("run config defaults follow the reference settings") {
  const RunConfig config;
  CHECK(config.d == 128);
  CHECK(config.alpha == 10.0);
  CHECK(config.n_samples == 20);
  CHECK(config.radius == 1.0);
  CHECK(config.lr == 0.01);
  CHECK(config.batch_size == 3);
  CHECK(config.steps == 60000);
  CHECK(config.momentum == 0.0);
  CHECK(config.sigma2_floor == 1e-3);
  CHECK_FALSE(config.detach_prototype_in_sampling);

  const RunConfig desk = RunConfig::desk_default();
  CHECK(desk.d_in == 64);
  CHECK(desk.d == 16);
  CHECK(desk.steps == 5000);
  CHECK(desk.alpha == 10.0);
  CHECK(desk.n_samples == 20);
  CHECK(desk.radius == 1.0);
}

TEST_CASE("run config json parsing") {
  const RunConfig desk =
      RunConfig::from_json(R"({"preset":"desk","seed":3,"steps":100})");
  CHECK(desk.d == 16);
  CHECK(desk.steps == 100);
  CHECK(desk.seed == 3);

  CHECK_THROWS_AS(RunConfig::from_json("not json"), FormatError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"radius":-1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"n_samples":0})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"preset":"bogus"})"), ConfigError);

  const RunConfig round =
      RunConfig::from_json(RunConfig::desk_default().to_json());
  CHECK(round.d == 16);
  CHECK(round.log_interval == RunConfig::desk_default().log_interval);
}

TEST_CASE("sgd reference updates") {
  SeededRng rng(1);
  ModelState m = init_model(4, 3, 2, rng);
  GradientBuffer g = GradientBuffer::zeros_like(m);
  g.a = 0.5;
  SgdOptimizer opt(m, 0.01, 0.0);
  opt.step(m, g);
  CHECK(m.scales.a == 0.995);

  // lr = 0 leaves everything in place (prototypes up to renormalization).
  ModelState frozen = init_model(4, 3, 2, rng);
  const ModelState before = frozen;
  SgdOptimizer noop(frozen, 0.0, 0.0);
  GradientBuffer big = GradientBuffer::zeros_like(frozen);
  for (auto& v : big.proj_weight.values) v = 7.0;
  big.a = 3.0;
  noop.step(frozen, big);
  CHECK(frozen.scales.a == before.scales.a);
  CHECK(frozen.projector.weight.values == before.projector.weight.values);
  for (std::size_t i = 0; i < before.prototypes.c.values.size(); ++i)
    CHECK(frozen.prototypes.c.values[i] ==
          doctest::Approx(before.prototypes.c.values[i]).epsilon(1e-15));

  // Momentum accumulates velocity across steps.
  ModelState mom = init_model(4, 3, 2, rng);
  SgdOptimizer with_mom(mom, 0.1, 0.5);
  GradientBuffer g1 = GradientBuffer::zeros_like(mom);
  g1.a = 1.0;
  const double a0 = mom.scales.a;
  with_mom.step(mom, g1);  // v = 1, a -= 0.1
  CHECK(mom.scales.a == doctest::Approx(a0 - 0.1).epsilon(1e-15));
  GradientBuffer g2 = GradientBuffer::zeros_like(mom);
  g2.a = 0.0;
  with_mom.step(mom, g2);  // v = 0.5, a -= 0.05
  CHECK(mom.scales.a == doctest::Approx(a0 - 0.15).epsilon(1e-15));
}

TEST_CASE("training is deterministic and keeps prototypes unit norm") {
  const Dataset ds = three_blob_dataset();
  const RunConfig config = small_config();

  const TrainResult run1 = train(config, ds);
  const TrainResult run2 = train(config, ds);
  CHECK(checkpoint_to_json(run1.model) == checkpoint_to_json(run2.model));
  CHECK(run1.model.step == config.steps);

  REQUIRE(!run1.history.records.empty());
  CHECK(run1.history.records.front().step == 0);
  CHECK(run1.history.records.back().step == config.steps - 1);
  CHECK(std::isfinite(run1.history.records.front().losses.total));
  CHECK(run1.history.records.front().losses.total > 0.0);
  for (const auto& rec : run1.history.records) {
    CHECK(rec.proto_norm_max_dev <= 1e-9);
    CHECK(std::abs(rec.losses.total -
                   (rec.losses.ce + rec.losses.ortho +
                    config.alpha * rec.losses.match)) <= 1e-12);
  }
  CHECK(max_prototype_norm_deviation(run1.model) <= 1e-9);
}

TEST_CASE("training edge cases") {
  const Dataset ds = three_blob_dataset();

  RunConfig zero = small_config();
  zero.steps = 0;
  const TrainResult none = train(zero, ds);
  SeededRng rng(zero.seed);
  const ModelState fresh =
      init_model(zero.d_in, zero.d, 3, rng, zero.sigma2_floor);
  CHECK(checkpoint_to_json(none.model) == checkpoint_to_json(fresh));
  CHECK(none.history.records.empty());

  Dataset empty;
  empty.num_classes = 3;
  empty.feature_dim = 4;
  CHECK_THROWS_AS(train(small_config(), empty), ConfigError);

  RunConfig wrong_dim = small_config();
  wrong_dim.d_in = 9;
  CHECK_THROWS_AS(train(wrong_dim, ds), ConfigError);

  RunConfig too_few_classes = small_config();
  too_few_classes.num_classes = 2;  // dataset has 3
  CHECK_THROWS_AS(train(too_few_classes, ds), ConfigError);
}

TEST_CASE("training aborts on numeric blow-up with diagnostics") {
  const Dataset ds = three_blob_dataset();
  RunConfig explode = small_config();
  explode.lr = 1e80;
  explode.steps = 50;
  CHECK_THROWS_AS(train(explode, ds), NumericError);
}

TEST_CASE("history json lists every logged record") {
  const Dataset ds = three_blob_dataset();
  RunConfig config = small_config();
  config.steps = 120;
  config.log_interval = 40;
  const TrainResult result = train(config, ds);
  // Steps 0, 40, 80 and the final step 119.
  REQUIRE(result.history.records.size() == 4);
  CHECK(result.history.records[3].step == 119);
  const std::string json = result.history.to_json();
  CHECK(json.find("\"step\": 80") != std::string::npos);
  CHECK(json.find("proto_norm_max_dev") != std::string::npos);
}
