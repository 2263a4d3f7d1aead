// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "dpl/dpl.h"

#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "grad_check.hpp"
#include "inference.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "trainer.hpp"
#include "verify.hpp"

struct dpl_dataset {
  dpl::Dataset data;
};

struct dpl_model {
  dpl::ModelState state;
};

namespace {

thread_local std::string g_last_error = "no error";

dpl_status status_from(const dpl::Error& e) {
  switch (e.kind()) {
    case dpl::ErrorKind::InvalidArgument:
      return DPL_ERR_INVALID_ARGUMENT;
    case dpl::ErrorKind::Format:
      return DPL_ERR_FORMAT;
    case dpl::ErrorKind::Io:
      return DPL_ERR_IO;
    case dpl::ErrorKind::Numeric:
      return DPL_ERR_NUMERIC;
  }
  return DPL_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs a body, translating exceptions into status codes and the
// thread-local error message.
template <typename Fn>
dpl_status guarded(Fn&& body) {
  try {
    return body();
  } catch (const dpl::Error& e) {
    g_last_error = e.what();
    return status_from(e);
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DPL_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DPL_ERR_INVALID_ARGUMENT;
  }
}

dpl_status require_arg(bool ok, const char* msg) {
  if (!ok) {
    g_last_error = msg;
    return DPL_ERR_INVALID_ARGUMENT;
  }
  return DPL_OK;
}

}  // namespace

extern "C" {

const char* dpl_version(void) { return "1.0.0"; }

const char* dpl_last_error(void) { return g_last_error.c_str(); }

void dpl_string_free(char* str) { delete[] str; }

dpl_status dpl_dataset_generate(const char* spec_json, dpl_dataset** out) {
  if (auto rc = require_arg(spec_json && out, "null argument")) return rc;
  return guarded([&] {
    auto spec = dpl::GeneratorSpec::from_json(spec_json);
    auto* handle = new dpl_dataset{dpl::generate_synthetic(spec)};
    *out = handle;
    return DPL_OK;
  });
}

dpl_status dpl_generator_spec_desk(uint64_t seed, char** out_json) {
  if (auto rc = require_arg(out_json != nullptr, "null argument")) return rc;
  return guarded([&] {
    *out_json = dup_string(dpl::GeneratorSpec::desk_default(seed).to_json());
    return *out_json ? DPL_OK : DPL_ERR_NUMERIC;
  });
}

dpl_status dpl_dataset_load(const char* path, dpl_dataset** out) {
  if (auto rc = require_arg(path && out, "null argument")) return rc;
  return guarded([&] {
    *out = new dpl_dataset{dpl::load_dataset(path)};
    return DPL_OK;
  });
}

dpl_status dpl_dataset_save(const dpl_dataset* dataset, const char* path) {
  if (auto rc = require_arg(dataset && path, "null argument")) return rc;
  return guarded([&] {
    dpl::save_dataset(dataset->data, path);
    return DPL_OK;
  });
}

dpl_status dpl_dataset_split(const dpl_dataset* dataset, double train_frac,
                             uint64_t seed, dpl_dataset** out_train,
                             dpl_dataset** out_test) {
  if (auto rc = require_arg(dataset && out_train && out_test, "null argument"))
    return rc;
  return guarded([&] {
    auto [train, test] = dpl::split(dataset->data, train_frac, seed);
    *out_train = new dpl_dataset{std::move(train)};
    *out_test = new dpl_dataset{std::move(test)};
    return DPL_OK;
  });
}

int64_t dpl_dataset_size(const dpl_dataset* dataset) {
  return dataset ? static_cast<int64_t>(dataset->data.size()) : -1;
}

int32_t dpl_dataset_num_classes(const dpl_dataset* dataset) {
  return dataset ? static_cast<int32_t>(dataset->data.num_classes) : -1;
}

int32_t dpl_dataset_feature_dim(const dpl_dataset* dataset) {
  return dataset ? static_cast<int32_t>(dataset->data.feature_dim) : -1;
}

void dpl_dataset_free(dpl_dataset* dataset) { delete dataset; }

dpl_status dpl_train(const char* config_json, const dpl_dataset* dataset,
                     dpl_model** out, char** out_history_json) {
  if (auto rc = require_arg(config_json && dataset && out, "null argument"))
    return rc;
  return guarded([&] {
    const auto config = dpl::RunConfig::from_json(config_json);
    dpl::TrainResult result = dpl::train(config, dataset->data);
    if (out_history_json) {
      *out_history_json = dup_string(result.history.to_json());
      if (!*out_history_json) return DPL_ERR_NUMERIC;
    }
    *out = new dpl_model{std::move(result.model)};
    return DPL_OK;
  });
}

dpl_status dpl_model_save(const dpl_model* model, const char* path) {
  if (auto rc = require_arg(model && path, "null argument")) return rc;
  return guarded([&] {
    dpl::save_checkpoint(model->state, path);
    return DPL_OK;
  });
}

dpl_status dpl_model_load(const char* path, dpl_model** out) {
  if (auto rc = require_arg(path && out, "null argument")) return rc;
  return guarded([&] {
    *out = new dpl_model{dpl::load_checkpoint(path)};
    return DPL_OK;
  });
}

int32_t dpl_model_feature_dim(const dpl_model* model) {
  return model ? static_cast<int32_t>(model->state.dims.d_in) : -1;
}

int32_t dpl_model_num_classes(const dpl_model* model) {
  return model ? static_cast<int32_t>(model->state.dims.num_classes) : -1;
}

void dpl_model_free(dpl_model* model) { delete model; }

dpl_status dpl_predict(const dpl_model* model, const double* feature,
                       int32_t dim, dpl_inference_mode mode,
                       int32_t* out_class, double* out_probs) {
  if (auto rc = require_arg(model && feature && out_class, "null argument"))
    return rc;
  if (auto rc = require_arg(dim > 0, "feature dimension must be positive"))
    return rc;
  return guarded([&] {
    const std::span<const double> view(feature, static_cast<std::size_t>(dim));
    const dpl::Vector z = dpl::project(model->state, view);
    const dpl::InferenceTrace trace = dpl::run_inference(
        model->state, z,
        mode == DPL_INFERENCE_BIASED ? dpl::InferenceMode::Biased
                                     : dpl::InferenceMode::Unbiased);
    *out_class = static_cast<int32_t>(dpl::predict(trace));
    if (out_probs)
      std::memcpy(out_probs, trace.probabilities.data(),
                  trace.probabilities.size() * sizeof(double));
    return DPL_OK;
  });
}

dpl_status dpl_evaluate(const dpl_model* model, const dpl_dataset* dataset,
                        dpl_inference_mode mode, int32_t topk,
                        char** out_metrics_json) {
  if (auto rc =
          require_arg(model && dataset && out_metrics_json, "null argument"))
    return rc;
  return guarded([&] {
    std::optional<int> k;
    if (topk > 0) k = topk;
    const dpl::MetricsReport report = dpl::evaluate(
        model->state, dataset->data,
        mode == DPL_INFERENCE_BIASED ? dpl::InferenceMode::Biased
                                     : dpl::InferenceMode::Unbiased,
        k);
    *out_metrics_json = dup_string(report.to_json());
    return *out_metrics_json ? DPL_OK : DPL_ERR_NUMERIC;
  });
}

dpl_status dpl_compare_modes(const dpl_model* model,
                             const dpl_dataset* dataset, int32_t topk,
                             char** out_report_json) {
  if (auto rc =
          require_arg(model && dataset && out_report_json, "null argument"))
    return rc;
  return guarded([&] {
    std::optional<int> k;
    if (topk > 0) k = topk;
    *out_report_json =
        dup_string(dpl::compare_modes_json(model->state, dataset->data, k));
    return *out_report_json ? DPL_OK : DPL_ERR_NUMERIC;
  });
}

dpl_status dpl_export_embeddings(const dpl_model* model,
                                 const dpl_dataset* dataset, const char* path,
                                 int32_t samples_per_class,
                                 uint64_t sample_seed) {
  if (auto rc = require_arg(model && dataset && path, "null argument"))
    return rc;
  if (auto rc = require_arg(samples_per_class >= 0,
                            "samples_per_class must be >= 0"))
    return rc;
  return guarded([&] {
    dpl::export_embeddings(model->state, dataset->data, path,
                           static_cast<std::size_t>(samples_per_class),
                           sample_seed);
    return DPL_OK;
  });
}

dpl_status dpl_grad_check(uint64_t seed, char** out_report_json) {
  return guarded([&] {
    const dpl::GradCheckReport report = dpl::run_grad_check(seed);
    if (out_report_json) {
      *out_report_json = dup_string(report.to_json());
      if (!*out_report_json) return DPL_ERR_NUMERIC;
    }
    if (!report.pass) {
      g_last_error = "gradient check failed (max relative error " +
                     std::to_string(report.max_rel_err) + ")";
      return DPL_ERR_NUMERIC;
    }
    return DPL_OK;
  });
}

dpl_status dpl_verify(char** out_report_json) {
  return guarded([&] {
    const dpl::VerifyReport report = dpl::run_verification();
    if (out_report_json) {
      *out_report_json = dup_string(report.to_json());
      if (!*out_report_json) return DPL_ERR_NUMERIC;
    }
    if (!report.pass) {
      for (const auto& check : report.checks)
        if (!check.pass) {
          g_last_error = "verification failed: " + check.name + ": " +
                         check.detail;
          break;
        }
      return DPL_ERR_NUMERIC;
    }
    return DPL_OK;
  });
}

}  // extern "C"
