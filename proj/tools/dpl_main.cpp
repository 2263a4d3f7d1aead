// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Everything goes through the C API in dpl/dpl.h;
// this translation unit never touches the library internals.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpl/dpl.h"

namespace {

// CLI exit codes: 0 success, 1 usage, 2 data/format, 3 numeric failure.
int exit_code(dpl_status status) {
  switch (status) {
    case DPL_OK:
      return 0;
    case DPL_ERR_INVALID_ARGUMENT:
      return 1;
    case DPL_ERR_FORMAT:
    case DPL_ERR_IO:
      return 2;
    case DPL_ERR_NUMERIC:
      return 3;
  }
  return 1;
}

int fail(dpl_status status) {
  std::cerr << "error: " << dpl_last_error() << "\n";
  return exit_code(status);
}

// Accepts inline JSON (starts with '{') or a path to a JSON file.
bool read_json_argument(const std::string& arg, std::string& out) {
  if (!arg.empty() && arg.front() == '{') {
    out = arg;
    return true;
  }
  std::ifstream in(arg, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open '" << arg << "' for reading\n";
    return false;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot open '" << path << "' for writing\n";
    return false;
  }
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  return static_cast<bool>(out);
}

struct StringGuard {
  char* value = nullptr;
  ~StringGuard() { dpl_string_free(value); }
};

struct DatasetGuard {
  dpl_dataset* value = nullptr;
  ~DatasetGuard() { dpl_dataset_free(value); }
};

struct ModelGuard {
  dpl_model* value = nullptr;
  ~ModelGuard() { dpl_model_free(value); }
};

int cmd_gen_data(const std::string& spec_arg, const std::string& out_path) {
  std::string spec_json;
  if (!read_json_argument(spec_arg, spec_json)) return 2;
  DatasetGuard dataset;
  if (auto rc = dpl_dataset_generate(spec_json.c_str(), &dataset.value))
    return fail(rc);
  if (auto rc = dpl_dataset_save(dataset.value, out_path.c_str()))
    return fail(rc);
  std::cout << "wrote " << dpl_dataset_size(dataset.value) << " instances ("
            << dpl_dataset_num_classes(dataset.value) << " classes, dim "
            << dpl_dataset_feature_dim(dataset.value) << ") to " << out_path
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_arg, const std::string& data_path,
              const std::string& out_path) {
  std::string config_json;
  if (!read_json_argument(config_arg, config_json)) return 2;
  DatasetGuard dataset;
  if (auto rc = dpl_dataset_load(data_path.c_str(), &dataset.value))
    return fail(rc);
  ModelGuard model;
  StringGuard history;
  if (auto rc = dpl_train(config_json.c_str(), dataset.value, &model.value,
                          &history.value))
    return fail(rc);
  if (auto rc = dpl_model_save(model.value, out_path.c_str()))
    return fail(rc);

  const auto doc = nlohmann::json::parse(history.value);
  if (!doc.at("records").empty()) {
    const auto& last = doc.at("records").back();
    std::cout << "step " << last.at("step").get<std::uint64_t>()
              << ": total " << last.at("total").get<double>() << " (ce "
              << last.at("ce").get<double>() << ", ortho "
              << last.at("ortho").get<double>() << ", match "
              << last.at("match").get<double>() << ")\n";
  }
  std::cout << "checkpoint written to " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_path,
             const std::string& mode, int topk, const std::string& out_path) {
  ModelGuard model;
  if (auto rc = dpl_model_load(ckpt.c_str(), &model.value)) return fail(rc);
  DatasetGuard dataset;
  if (auto rc = dpl_dataset_load(data_path.c_str(), &dataset.value))
    return fail(rc);
  StringGuard metrics;
  const dpl_inference_mode m =
      mode == "biased" ? DPL_INFERENCE_BIASED : DPL_INFERENCE_UNBIASED;
  if (auto rc =
          dpl_evaluate(model.value, dataset.value, m, topk, &metrics.value))
    return fail(rc);
  if (!write_file(out_path, metrics.value)) return 2;
  const auto doc = nlohmann::json::parse(metrics.value);
  std::cout << mode << ": micro_recall " << doc.at("micro_recall").get<double>()
            << ", mean_recall " << doc.at("mean_recall").get<double>()
            << ", harmonic_f " << doc.at("harmonic_f").get<double>() << "\n";
  return 0;
}

int cmd_compare(const std::string& ckpt, const std::string& data_path,
                int topk, const std::string& out_path) {
  ModelGuard model;
  if (auto rc = dpl_model_load(ckpt.c_str(), &model.value)) return fail(rc);
  DatasetGuard dataset;
  if (auto rc = dpl_dataset_load(data_path.c_str(), &dataset.value))
    return fail(rc);
  StringGuard report;
  if (auto rc =
          dpl_compare_modes(model.value, dataset.value, topk, &report.value))
    return fail(rc);
  if (!write_file(out_path, report.value)) return 2;
  const auto doc = nlohmann::json::parse(report.value);
  std::cout << "mean_recall delta (unbiased - biased): "
            << doc.at("mean_recall_delta").get<double>() << "\n"
            << "micro_recall delta (unbiased - biased): "
            << doc.at("micro_recall_delta").get<double>() << "\n";
  return 0;
}

int cmd_export(const std::string& ckpt, const std::string& data_path,
               const std::string& out_path, int samples,
               std::uint64_t sample_seed) {
  ModelGuard model;
  if (auto rc = dpl_model_load(ckpt.c_str(), &model.value)) return fail(rc);
  DatasetGuard dataset;
  if (auto rc = dpl_dataset_load(data_path.c_str(), &dataset.value))
    return fail(rc);
  if (auto rc = dpl_export_embeddings(model.value, dataset.value,
                                      out_path.c_str(), samples, sample_seed))
    return fail(rc);
  std::cout << "embeddings written to " << out_path << "\n";
  return 0;
}

int cmd_grad_check(std::uint64_t seed) {
  StringGuard report;
  const dpl_status rc = dpl_grad_check(seed, &report.value);
  if (report.value) {
    const auto doc = nlohmann::json::parse(report.value);
    for (const auto& cell : doc.at("cells"))
      std::printf("%-4s %-12s %-7s max_rel_err %.3e\n",
                  cell.at("pass").get<bool>() ? "ok" : "FAIL",
                  cell.at("group").get<std::string>().c_str(),
                  cell.at("component").get<std::string>().c_str(),
                  cell.at("max_rel_err").get<double>());
    std::printf("gradient check %s (max relative error %.3e, tolerance %g)\n",
                doc.at("pass").get<bool>() ? "PASSED" : "FAILED",
                doc.at("max_rel_err").get<double>(),
                doc.at("tolerance").get<double>());
  }
  if (rc != DPL_OK && !report.value) return fail(rc);
  return exit_code(rc);
}

int cmd_verify() {
  StringGuard report;
  const dpl_status rc = dpl_verify(&report.value);
  if (report.value) {
    const auto doc = nlohmann::json::parse(report.value);
    for (const auto& check : doc.at("checks")) {
      std::printf("%-4s %s\n", check.at("pass").get<bool>() ? "ok" : "FAIL",
                  check.at("name").get<std::string>().c_str());
      if (check.contains("detail"))
        std::printf("     %s\n", check.at("detail").get<std::string>().c_str());
    }
    std::printf("verification %s\n",
                doc.at("pass").get<bool>() ? "PASSED" : "FAILED");
  }
  if (rc != DPL_OK && !report.value) return fail(rc);
  return exit_code(rc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpl: prototype-based long-tailed classifier with "
               "diversity-aware unbiased inference"};
  app.require_subcommand(1);

  // gen-data
  std::string spec_arg, out_path;
  auto* gen = app.add_subcommand("gen-data",
                                 "generate a synthetic dataset from a spec");
  gen->add_option("--spec", spec_arg,
                  "generator spec (JSON file path or inline JSON)")
      ->required();
  gen->add_option("--out", out_path, "output dataset path (.csv or DPLF)")
      ->required();

  // train
  std::string config_arg, data_path, ckpt_path;
  auto* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--config", config_arg,
                    "run config (JSON file path or inline JSON)")
      ->required();
  train->add_option("--data", data_path, "training dataset path")->required();
  train->add_option("--out", ckpt_path, "output checkpoint path")->required();

  // eval
  std::string eval_ckpt, eval_data, eval_mode = "biased", eval_out;
  int eval_topk = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--data", eval_data, "evaluation dataset path")->required();
  eval->add_option("--mode", eval_mode, "inference mode")
      ->check(CLI::IsMember({"biased", "unbiased"}))
      ->required();
  eval->add_option("--topk", eval_topk, "grouped top-K recall cutoff");
  eval->add_option("--out", eval_out, "metrics JSON output path")->required();

  // compare-modes
  std::string cmp_ckpt, cmp_data, cmp_out;
  int cmp_topk = 0;
  auto* cmp = app.add_subcommand(
      "compare-modes", "evaluate biased and unbiased inference side by side");
  cmp->add_option("--ckpt", cmp_ckpt, "checkpoint path")->required();
  cmp->add_option("--data", cmp_data, "evaluation dataset path")->required();
  cmp->add_option("--topk", cmp_topk, "grouped top-K recall cutoff");
  cmp->add_option("--out", cmp_out, "report JSON output path")->required();

  // export-embeddings
  std::string exp_ckpt, exp_data, exp_out;
  int exp_samples = 0;
  std::uint64_t exp_seed = 0;
  auto* exp = app.add_subcommand("export-embeddings",
                                 "export prototypes, features and samples");
  exp->add_option("--ckpt", exp_ckpt, "checkpoint path")->required();
  exp->add_option("--data", exp_data, "dataset path")->required();
  exp->add_option("--out", exp_out, "output CSV path")->required();
  exp->add_option("--samples", exp_samples, "drawn samples per prototype");
  exp->add_option("--sample-seed", exp_seed, "seed for drawn samples");

  // grad-check
  std::uint64_t gc_seed = 7;
  auto* gc = app.add_subcommand(
      "grad-check", "finite-difference check of every analytic gradient");
  gc->add_option("--seed", gc_seed, "instance seed");

  // verify
  auto* verify =
      app.add_subcommand("verify", "run the built-in analytic-identity suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage errors exit 1
  }

  if (gen->parsed()) return cmd_gen_data(spec_arg, out_path);
  if (train->parsed()) return cmd_train(config_arg, data_path, ckpt_path);
  if (eval->parsed())
    return cmd_eval(eval_ckpt, eval_data, eval_mode, eval_topk, eval_out);
  if (cmp->parsed()) return cmd_compare(cmp_ckpt, cmp_data, cmp_topk, cmp_out);
  if (exp->parsed())
    return cmd_export(exp_ckpt, exp_data, exp_out, exp_samples, exp_seed);
  if (gc->parsed()) return cmd_grad_check(gc_seed);
  if (verify->parsed()) return cmd_verify();
  return 1;
}
