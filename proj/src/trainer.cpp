// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace dpl {

RunConfig RunConfig::desk_default() {
  RunConfig config;
  config.d_in = 64;
  config.d = 16;
  config.num_classes = 4;
  config.steps = 5000;
  config.log_interval = 100;
  return config;
}

void RunConfig::validate() const {
  if (d_in == 0 || d == 0)
    throw ConfigError("config: dimensions must be >= 1");
  if (alpha < 0.0)
    throw ConfigError("config: alpha must be >= 0");
  if (n_samples == 0)
    throw ConfigError("config: n_samples must be >= 1");
  if (!(radius > 0.0))
    throw ConfigError("config: radius must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw ConfigError("config: lr must be finite and >= 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("config: momentum must lie in [0, 1)");
  if (batch_size == 0)
    throw ConfigError("config: batch_size must be >= 1");
  if (!(sigma2_floor > 0.0))
    throw ConfigError("config: sigma2_floor must be positive");
  if (log_interval == 0)
    throw ConfigError("config: log_interval must be >= 1");
}

RunConfig RunConfig::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    RunConfig config;
    if (doc.contains("preset")) {
      const auto preset = doc.at("preset").get<std::string>();
      if (preset == "desk")
        config = desk_default();
      else if (preset != "paper")
        throw ConfigError("config: unknown preset '" + preset + "'");
    }
    auto get = [&doc](const char* key, auto& field) {
      if (doc.contains(key))
        field = doc.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d_in", config.d_in);
    get("d", config.d);
    get("num_classes", config.num_classes);
    get("alpha", config.alpha);
    get("n_samples", config.n_samples);
    get("radius", config.radius);
    get("lr", config.lr);
    get("momentum", config.momentum);
    get("batch_size", config.batch_size);
    get("steps", config.steps);
    get("seed", config.seed);
    get("sigma2_floor", config.sigma2_floor);
    get("detach_prototype_in_sampling", config.detach_prototype_in_sampling);
    get("log_interval", config.log_interval);
    config.validate();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

std::string RunConfig::to_json() const {
  nlohmann::json doc;
  doc["d_in"] = d_in;
  doc["d"] = d;
  doc["num_classes"] = num_classes;
  doc["alpha"] = alpha;
  doc["n_samples"] = n_samples;
  doc["radius"] = radius;
  doc["lr"] = lr;
  doc["momentum"] = momentum;
  doc["batch_size"] = batch_size;
  doc["steps"] = steps;
  doc["seed"] = seed;
  doc["sigma2_floor"] = sigma2_floor;
  doc["detach_prototype_in_sampling"] = detach_prototype_in_sampling;
  doc["log_interval"] = log_interval;
  return doc.dump(2);
}

std::string TrainHistory::to_json() const {
  nlohmann::json doc;
  doc["records"] = nlohmann::json::array();
  for (const auto& rec : records)
    doc["records"].push_back({{"step", rec.step},
                              {"ce", rec.losses.ce},
                              {"ortho", rec.losses.ortho},
                              {"match", rec.losses.match},
                              {"total", rec.losses.total},
                              {"proto_norm_max_dev", rec.proto_norm_max_dev}});
  return doc.dump(2);
}

SgdOptimizer::SgdOptimizer(const ModelState& model, double lr, double momentum)
    : lr_(lr),
      momentum_(momentum),
      velocity_(GradientBuffer::zeros_like(model)) {}

void SgdOptimizer::step(ModelState& model, const GradientBuffer& grads) {
  // v <- momentum v + g, then p <- p - lr v.
  velocity_.scale_by(momentum_);
  velocity_.accumulate(grads, 1.0);

  auto apply_vec = [this](Vector& param, const Vector& v) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr_ * v[i];
  };
  auto apply_mat = [this](Matrix& param, const Matrix& v) {
    for (std::size_t i = 0; i < param.values.size(); ++i)
      param.values[i] -= lr_ * v.values[i];
  };
  apply_mat(model.projector.weight, velocity_.proj_weight);
  apply_vec(model.projector.bias, velocity_.proj_bias);
  apply_mat(model.prototypes.c, velocity_.prototypes);
  apply_mat(model.variance_net.w1, velocity_.vn_w1);
  apply_vec(model.variance_net.b1, velocity_.vn_b1);
  apply_mat(model.variance_net.w2, velocity_.vn_w2);
  apply_vec(model.variance_net.b2, velocity_.vn_b2);
  model.scales.a -= lr_ * velocity_.a;
  model.scales.b -= lr_ * velocity_.b;

  renormalize_prototypes(model);
}

namespace {

const char* first_nonfinite_group(const GradientBuffer& g) {
  if (!all_finite(g.proj_weight.values)) return "proj_weight";
  if (!all_finite(g.proj_bias)) return "proj_bias";
  if (!all_finite(g.prototypes.values)) return "prototypes";
  if (!all_finite(g.vn_w1.values)) return "vn_w1";
  if (!all_finite(g.vn_b1)) return "vn_b1";
  if (!all_finite(g.vn_w2.values)) return "vn_w2";
  if (!all_finite(g.vn_b2)) return "vn_b2";
  if (!std::isfinite(g.a)) return "a";
  if (!std::isfinite(g.b)) return "b";
  return nullptr;
}

}  // namespace

TrainResult train(const RunConfig& config, const Dataset& dataset) {
  config.validate();
  if (dataset.instances.empty())
    throw ConfigError("train: empty dataset");
  dataset.validate();
  if (dataset.feature_dim != config.d_in)
    throw ConfigError("train: dataset feature_dim " +
                      std::to_string(dataset.feature_dim) +
                      " does not match config d_in " +
                      std::to_string(config.d_in));
  const std::size_t num_classes =
      config.num_classes == 0 ? dataset.num_classes : config.num_classes;
  if (dataset.num_classes > num_classes)
    throw ConfigError("train: dataset has more classes than the config");
  if (num_classes < 2)
    throw ConfigError("train: need at least two classes");

  SeededRng rng(config.seed);
  TrainResult result;
  result.model =
      init_model(config.d_in, config.d, num_classes, rng, config.sigma2_floor);

  ObjectiveConfig objective;
  objective.alpha = config.alpha;
  objective.radius = config.radius;
  objective.detach_prototype_in_sampling = config.detach_prototype_in_sampling;

  SgdOptimizer optimizer(result.model, config.lr, config.momentum);
  const std::size_t n = dataset.instances.size();

  std::vector<std::size_t> batch_indices(config.batch_size);
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (auto& idx : batch_indices) idx = rng.next_below(n);

    std::vector<TrainingExample> batch;
    batch.reserve(config.batch_size);
    std::set<std::uint32_t> present;
    for (auto idx : batch_indices) {
      const auto& inst = dataset.instances[idx];
      batch.push_back(TrainingExample{&inst.feature, inst.label});
      present.insert(inst.label);
    }

    SampleSetMap samplesets;
    for (auto cls : present)  // ascending order keeps the stream deterministic
      samplesets.emplace(
          cls, draw_samples(result.model, cls, config.n_samples, rng));

    BackwardResult back =
        backward(result.model, batch, samplesets, objective);
    if (!std::isfinite(back.losses.total))
      throw NumericError("train: non-finite loss at step " +
                         std::to_string(step));
    if (const char* group = first_nonfinite_group(back.grads))
      throw NumericError("train: non-finite gradient in group " +
                         std::string(group) + " at step " +
                         std::to_string(step) +
                         " (max |g| = " + std::to_string(back.grads.max_abs()) +
                         ")");

    optimizer.step(result.model, back.grads);
    result.model.step = step + 1;

    if (step % config.log_interval == 0 || step + 1 == config.steps) {
      TrainRecord rec;
      rec.step = step;
      rec.losses = back.losses;
      rec.proto_norm_max_dev = max_prototype_norm_deviation(result.model);
      result.history.records.push_back(rec);
    }
  }
  return result;
}

}  // namespace dpl
