// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0
//
// Exercises the shared-library surface the way an external consumer would.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include <doctest.h>
#include <json.hpp>

#include "dpl/dpl.h"

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("dpl_capi_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

constexpr const char* kTinySpec = R"({
  "fine_means": [[2.0,0.0,0.0,0.0],[0.0,2.0,0.0,0.0],[0.0,0.0,2.0,0.0]],
  "fine_stddev": [0.3,0.3,0.3],
  "fine_counts": [60,25,15],
  "fine_to_coarse": [0,1,2],
  "group_size": 5,
  "seed": 5
})";

constexpr const char* kTinyConfig = R"({
  "d_in": 4, "d": 4, "num_classes": 3,
  "steps": 300, "log_interval": 50, "seed": 17
})";

}  // namespace

TEST_CASE("version and error text are always available") {
  CHECK(std::string(dpl_version()) == "1.0.0");
  CHECK(dpl_last_error() != nullptr);
}

TEST_CASE("dataset lifecycle through the C API") {
  TempDir dir;

  dpl_dataset* ds = nullptr;
  REQUIRE(dpl_dataset_generate(kTinySpec, &ds) == DPL_OK);
  CHECK(dpl_dataset_size(ds) == 100);
  CHECK(dpl_dataset_num_classes(ds) == 3);
  CHECK(dpl_dataset_feature_dim(ds) == 4);

  const std::string csv = dir.file("d.csv");
  const std::string bin = dir.file("d.bin");
  REQUIRE(dpl_dataset_save(ds, csv.c_str()) == DPL_OK);
  REQUIRE(dpl_dataset_save(ds, bin.c_str()) == DPL_OK);

  dpl_dataset* from_csv = nullptr;
  dpl_dataset* from_bin = nullptr;
  REQUIRE(dpl_dataset_load(csv.c_str(), &from_csv) == DPL_OK);
  REQUIRE(dpl_dataset_load(bin.c_str(), &from_bin) == DPL_OK);
  CHECK(dpl_dataset_size(from_csv) == 100);
  CHECK(dpl_dataset_size(from_bin) == 100);

  dpl_dataset* train = nullptr;
  dpl_dataset* test = nullptr;
  REQUIRE(dpl_dataset_split(ds, 0.7, 3, &train, &test) == DPL_OK);
  CHECK(dpl_dataset_size(train) == 70);
  CHECK(dpl_dataset_size(test) == 30);

  dpl_dataset_free(ds);
  dpl_dataset_free(from_csv);
  dpl_dataset_free(from_bin);
  dpl_dataset_free(train);
  dpl_dataset_free(test);
}

TEST_CASE("desk generator spec is exposed") {
  char* json = nullptr;
  REQUIRE(dpl_generator_spec_desk(1, &json) == DPL_OK);
  const auto doc = nlohmann::json::parse(json);
  CHECK(doc.at("fine_counts").size() == 6);
  CHECK(doc.at("seed").get<std::uint64_t>() == 1);
  dpl_string_free(json);
}

TEST_CASE("training, checkpointing, prediction, evaluation") {
  TempDir dir;

  dpl_dataset* ds = nullptr;
  REQUIRE(dpl_dataset_generate(kTinySpec, &ds) == DPL_OK);

  dpl_model* model = nullptr;
  char* history = nullptr;
  REQUIRE(dpl_train(kTinyConfig, ds, &model, &history) == DPL_OK);
  REQUIRE(history != nullptr);
  const auto hist = nlohmann::json::parse(history);
  CHECK(!hist.at("records").empty());
  dpl_string_free(history);

  CHECK(dpl_model_feature_dim(model) == 4);
  CHECK(dpl_model_num_classes(model) == 3);

  const std::string ckpt = dir.file("model.json");
  REQUIRE(dpl_model_save(model, ckpt.c_str()) == DPL_OK);
  dpl_model* loaded = nullptr;
  REQUIRE(dpl_model_load(ckpt.c_str(), &loaded) == DPL_OK);

  const double feature[4] = {2.0, 0.0, 0.0, 0.0};
  int32_t cls = -1;
  double probs[3] = {0, 0, 0};
  REQUIRE(dpl_predict(loaded, feature, 4, DPL_INFERENCE_BIASED, &cls, probs) ==
          DPL_OK);
  CHECK(cls >= 0);
  CHECK(cls < 3);
  double sum = probs[0] + probs[1] + probs[2];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  char* metrics = nullptr;
  REQUIRE(dpl_evaluate(loaded, ds, DPL_INFERENCE_UNBIASED, 5, &metrics) ==
          DPL_OK);
  const auto doc = nlohmann::json::parse(metrics);
  CHECK(doc.at("mode") == "unbiased");
  CHECK(doc.at("micro_recall").is_number());
  CHECK(doc.at("recall_at_k").contains("5"));
  CHECK(doc.at("confusion").size() == 3);
  dpl_string_free(metrics);

  char* cmp = nullptr;
  REQUIRE(dpl_compare_modes(loaded, ds, 0, &cmp) == DPL_OK);
  const auto cmp_doc = nlohmann::json::parse(cmp);
  CHECK(cmp_doc.contains("biased"));
  CHECK(cmp_doc.contains("unbiased"));
  CHECK(cmp_doc.contains("per_class_recall_delta"));
  dpl_string_free(cmp);

  const std::string emb = dir.file("emb.csv");
  REQUIRE(dpl_export_embeddings(loaded, ds, emb.c_str(), 2, 9) == DPL_OK);
  CHECK(read_bytes(emb).rfind("kind,class,label", 0) == 0);

  dpl_model_free(model);
  dpl_model_free(loaded);
  dpl_dataset_free(ds);
}

TEST_CASE("error mapping") {
  CHECK(dpl_dataset_generate(nullptr, nullptr) == DPL_ERR_INVALID_ARGUMENT);

  dpl_dataset* ds = nullptr;
  CHECK(dpl_dataset_generate("{", &ds) == DPL_ERR_FORMAT);
  CHECK(dpl_dataset_generate(R"({"fine_means":[]})", &ds) ==
        DPL_ERR_INVALID_ARGUMENT);

  CHECK(dpl_dataset_load("/nonexistent/path.bin", &ds) == DPL_ERR_IO);
  CHECK(std::string(dpl_last_error()).find("nonexistent") !=
        std::string::npos);

  TempDir dir;
  const std::string bad = dir.file("bad.bin");
  std::ofstream(bad, std::ios::binary) << "XXXX123456789012345678901234";
  CHECK(dpl_dataset_load(bad.c_str(), &ds) == DPL_ERR_FORMAT);

  dpl_model* model = nullptr;
  CHECK(dpl_model_load(dir.file("missing.json").c_str(), &model) ==
        DPL_ERR_IO);
}

TEST_CASE("grad check via the C API") {
  char* report = nullptr;
  CHECK(dpl_grad_check(7, &report) == DPL_OK);
  REQUIRE(report != nullptr);
  const auto doc = nlohmann::json::parse(report);
  CHECK(doc.at("pass").get<bool>());
  CHECK(doc.at("max_rel_err").get<double>() <= 1e-4);
  dpl_string_free(report);
}

TEST_CASE("verification suite via the C API") {
  char* report = nullptr;
  CHECK(dpl_verify(&report) == DPL_OK);
  REQUIRE(report != nullptr);
  const auto doc = nlohmann::json::parse(report);
  CHECK(doc.at("pass").get<bool>());
  for (const auto& check : doc.at("checks")) CHECK(check.at("pass").get<bool>());
  dpl_string_free(report);
}
