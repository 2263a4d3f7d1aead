// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Runs every gate the project promises, one pass/fail
// line per criterion, exit 0 iff all hold. argv[1] must be the CLI binary
// (used for the determinism and format-robustness gates).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "diversity.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "grad_check.hpp"
#include "inference.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "rng.hpp"
#include "trainer.hpp"

namespace fs = std::filesystem;
using namespace dpl;

namespace {

std::string g_cli;
fs::path g_tmp;
int g_failures = 0;

void check(bool cond, const std::string& what, std::string& detail) {
  if (!cond) {
    if (!detail.empty()) detail += "; ";
    detail += "FAILED: " + what;
  }
}

void criterion(int id, const std::string& name,
               const std::function<void(std::string&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  try {
    body(detail);
  } catch (const std::exception& e) {
    if (!detail.empty()) detail += "; ";
    detail += std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  const bool pass = detail.empty() || detail.rfind("note:", 0) == 0;
  if (!pass) ++g_failures;
  std::printf("criterion %d %s: %s (%.2fs)%s%s\n", id,
              pass ? "PASS" : "FAIL", name.c_str(), seconds,
              detail.empty() ? "" : " — ", detail.c_str());
  std::fflush(stdout);
}

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WEXITSTATUS(rc);
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

std::string tmp_file(const std::string& name) {
  return (g_tmp / name).string();
}

struct SeedOutcome {
  double biased_micro = 0.0, biased_mean = 0.0;
  double unbiased_micro = 0.0, unbiased_mean = 0.0;
  double unbiased_micro_n1 = 0.0;
};

SeedOutcome run_desk_seed(std::uint64_t seed, bool with_n1) {
  const Dataset full = generate_synthetic(GeneratorSpec::desk_default(seed));
  const auto [train_ds, test_ds] = split(full, 0.7, seed);

  RunConfig config = RunConfig::desk_default();
  config.seed = seed;
  const TrainResult result = train(config, train_ds);

  SeedOutcome out;
  const MetricsReport biased =
      evaluate(result.model, test_ds, InferenceMode::Biased);
  const MetricsReport unbiased =
      evaluate(result.model, test_ds, InferenceMode::Unbiased);
  out.biased_micro = biased.micro_recall;
  out.biased_mean = biased.mean_recall;
  out.unbiased_micro = unbiased.micro_recall;
  out.unbiased_mean = unbiased.mean_recall;

  if (with_n1) {
    RunConfig n1 = config;
    n1.n_samples = 1;
    const TrainResult small = train(n1, train_ds);
    out.unbiased_micro_n1 =
        evaluate(small.model, test_ds, InferenceMode::Unbiased).micro_recall;
  }
  return out;
}

// Shared across criteria 2-4: a 1000-step desk training run.
ModelState g_model_1000;
TrainHistory g_history_1000;

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance_tests <path-to-cli>\n");
    return 2;
  }
  g_cli = argv[1];
  g_tmp = fs::temp_directory_path() /
          ("dpl_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_tmp);

  // ---- 1: gradient oracle ---------------------------------------------
  criterion(1, "gradient oracle (relative error <= 1e-4 on every cell)",
            [](std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    const GradCheckReport report = run_grad_check(7);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    check(report.cells.size() == 36, "expected 9 groups x 4 components",
          detail);
    for (const auto& cell : report.cells)
      check(cell.max_rel_err <= 1e-4,
            cell.group + "/" + cell.component + " rel err " +
                std::to_string(cell.max_rel_err),
            detail);
    check(report.pass, "report.pass", detail);
    check(seconds < 10.0, "runtime >= 10s", detail);
  });

  // Train the shared 1000-step desk model for criteria 2-4.
  {
    const Dataset full = generate_synthetic(GeneratorSpec::desk_default(1));
    const auto [train_ds, test_ds] = split(full, 0.7, 1);
    RunConfig config = RunConfig::desk_default();
    config.steps = 1000;
    config.seed = 1;
    TrainResult result = train(config, train_ds);
    g_model_1000 = std::move(result.model);
    g_history_1000 = std::move(result.history);
  }

  // ---- 2: reduction identity -------------------------------------------
  criterion(2, "sigma = 1 reduces unbiased to biased on 1000 queries",
            [](std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    SeededRng rng(424242);
    SigmaHook unit;
    unit.force_unit_sigma = true;
    for (int t = 0; t < 1000; ++t) {
      Vector z(g_model_1000.dims.d);
      for (auto& x : z) x = 2.0 * rng.next_gaussian();
      const InferenceTrace biased = biased_probabilities(g_model_1000, z);
      const InferenceTrace unbiased =
          unbiased_probabilities(g_model_1000, z, unit);
      for (std::size_t i = 0; i < biased.logits.size(); ++i)
        if (std::abs(unbiased.logits[i] - biased.logits[i]) > 1e-9) {
          check(false, "logit mismatch at query " + std::to_string(t), detail);
          return;
        }
      if (predict(biased) != predict(unbiased)) {
        check(false, "argmax mismatch at query " + std::to_string(t), detail);
        return;
      }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    check(seconds < 5.0, "runtime >= 5s", detail);
  });

  // ---- 3: sigma-scaling invariance ---------------------------------------
  criterion(3, "sigma scaling by 0.1 and 10 leaves logits and argmax",
            [](std::string& detail) {
    SeededRng rng(434343);
    for (const double kappa : {0.1, 10.0}) {
      SigmaHook hook;
      hook.sigma_scale = kappa;
      for (int t = 0; t < 1000; ++t) {
        Vector z(g_model_1000.dims.d);
        for (auto& x : z) x = 2.0 * rng.next_gaussian();
        const InferenceTrace base = unbiased_probabilities(g_model_1000, z);
        const InferenceTrace scaled =
            unbiased_probabilities(g_model_1000, z, hook);
        for (std::size_t i = 0; i < base.logits.size(); ++i)
          if (std::abs(scaled.logits[i] - base.logits[i]) > 1e-9) {
            check(false,
                  "logit mismatch at kappa " + std::to_string(kappa) +
                      " query " + std::to_string(t),
                  detail);
            return;
          }
        if (predict(base) != predict(scaled)) {
          check(false, "argmax mismatch at kappa " + std::to_string(kappa),
                detail);
          return;
        }
      }
    }
  });

  // ---- 4: prototype constraint ------------------------------------------
  criterion(4, "prototype norms stay within 1e-9 over a 1000-step run",
            [](std::string& detail) {
    check(!g_history_1000.records.empty(), "history is empty", detail);
    for (const auto& rec : g_history_1000.records)
      check(rec.proto_norm_max_dev <= 1e-9,
            "deviation " + std::to_string(rec.proto_norm_max_dev) +
                " at step " + std::to_string(rec.step),
            detail);
    check(max_prototype_norm_deviation(g_model_1000) <= 1e-9,
          "final deviation", detail);
  });

  // ---- 5: analytic loss values ---------------------------------------------
  criterion(5, "analytic loss reference values", [](std::string& detail) {
    // ce: two classes at distances (0, 1), a = 1, b = 0, label 0.
    ModelState two;
    two.dims = ModelDims{2, 2, 2, 2};
    two.projector.weight = Matrix(2, 2);
    two.projector.weight.at(0, 0) = 1.0;
    two.projector.weight.at(1, 1) = 1.0;
    two.projector.bias = Vector(2, 0.0);
    two.prototypes.c = Matrix(2, 2);
    two.prototypes.c.at(0, 0) = 1.0;
    two.prototypes.c.at(1, 0) = 1.0;
    two.prototypes.c.at(1, 1) = 1.0;
    two.variance_net.w1 = Matrix(2, 2, 0.0);
    two.variance_net.b1 = Vector(2, 0.0);
    two.variance_net.w2 = Matrix(2, 2, 0.0);
    two.variance_net.b2 = Vector(2, 0.0);
    two.scales = ScaleParams{1.0, 0.0};
    check(std::abs(ce_loss(two, Vector{1.0, 0.0}, 0) - 0.3132617) <= 1e-6,
          "ce reference", detail);

    // ortho: orthonormal -> 0; identical pair -> 1; pairwise 0.5 -> 0.5.
    PrototypeBank eye;
    eye.c = Matrix(3, 3, 0.0);
    for (int i = 0; i < 3; ++i) eye.c.at(i, i) = 1.0;
    check(std::abs(orthogonal_loss(eye) - 0.0) <= 1e-9, "ortho 0", detail);
    PrototypeBank twin;
    twin.c = Matrix(2, 2, 0.0);
    twin.c.at(0, 0) = 1.0;
    twin.c.at(1, 0) = 1.0;
    check(std::abs(orthogonal_loss(twin) - 1.0) <= 1e-9, "ortho 1", detail);
    PrototypeBank cone;
    cone.c = Matrix(3, 3, 0.0);
    cone.c.at(0, 0) = 1.0;
    cone.c.at(1, 0) = 0.5;
    cone.c.at(1, 1) = std::sqrt(3.0) / 2.0;
    cone.c.at(2, 0) = 0.5;
    cone.c.at(2, 1) = std::sqrt(3.0) / 6.0;
    cone.c.at(2, 2) = std::sqrt(2.0 / 3.0);
    check(std::abs(orthogonal_loss(cone) - 0.5) <= 1e-9, "ortho 0.5", detail);

    // match: hinge at distances 0.5, 2.0, 1.3 and the two-term mean.
    auto samples_at = [](double x) {
      SampleSet set;
      set.class_index = 0;
      set.samples = Matrix(1, 2, 0.0);
      set.samples.at(0, 0) = x;
      set.epsilons = Matrix(1, 2, 0.0);
      return set;
    };
    const Vector origin{0.0, 0.0};
    std::vector<BatchExample> one{{origin, 0}};
    SampleSetMap near;
    near.emplace(0, samples_at(0.5));
    check(std::abs(matching_loss(one, near, 1.0) - 0.0) <= 1e-9, "match 0",
          detail);
    SampleSetMap at2;
    at2.emplace(0, samples_at(2.0));
    check(std::abs(matching_loss(one, at2, 1.0) - 1.0) <= 1e-9, "match 1",
          detail);
    SampleSetMap at13;
    at13.emplace(0, samples_at(1.3));
    check(std::abs(matching_loss(one, at13, 1.0) - 0.09) <= 1e-9,
          "match 0.09", detail);
    SampleSetMap pair;
    pair.emplace(0, samples_at(0.5));
    {
      SampleSet s1 = samples_at(1.3);
      s1.class_index = 1;
      pair.emplace(1, std::move(s1));
    }
    std::vector<BatchExample> duo{{origin, 0}, {origin, 1}};
    check(std::abs(matching_loss(duo, pair, 1.0) - 0.045) <= 1e-9,
          "match 0.045", detail);
  });

  // ---- 6: semantic-diversity trend --------------------------------------------
  std::vector<SeedOutcome> outcomes;
  criterion(6, "unbiased inference trades micro recall for mean recall",
            [&outcomes](std::string& detail) {
    int mean_wins = 0, micro_holds = 0;
    double mean_gain = 0.0;
    std::ostringstream log;
    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      const auto start = std::chrono::steady_clock::now();
      const SeedOutcome out = run_desk_seed(seed, true);
      const double seconds = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
      outcomes.push_back(out);
      if (out.unbiased_mean > out.biased_mean) ++mean_wins;
      if (out.biased_micro >= out.unbiased_micro) ++micro_holds;
      mean_gain += out.unbiased_mean - out.biased_mean;
      log << " seed" << seed << "[mR " << out.biased_mean << "->"
          << out.unbiased_mean << ", R " << out.biased_micro << "->"
          << out.unbiased_micro << "]";
      check(seconds < 120.0, "seed runtime >= 2min", detail);
    }
    mean_gain /= 3.0;
    check(mean_wins == 3, "unbiased mean recall higher on only " +
                              std::to_string(mean_wins) + "/3 seeds",
          detail);
    check(mean_gain >= 0.05, "mean improvement " + std::to_string(mean_gain) +
                                 " below 5 points",
          detail);
    check(micro_holds >= 2, "biased micro >= unbiased micro on only " +
                                std::to_string(micro_holds) + "/3 seeds",
          detail);
    if (detail.empty())
      detail = "note: mean mR gain " + std::to_string(mean_gain) + ";" +
               log.str();
  });

  // ---- 7: N-ablation trend ------------------------------------------------------
  criterion(7, "more samples per class raise unbiased micro recall",
            [&outcomes](std::string& detail) {
    check(outcomes.size() == 3, "missing per-seed outcomes", detail);
    if (outcomes.size() != 3) return;
    int wins = 0;
    std::ostringstream log;
    for (std::size_t i = 0; i < 3; ++i) {
      if (outcomes[i].unbiased_micro > outcomes[i].unbiased_micro_n1) ++wins;
      log << " seed" << (i + 1) << "[N1 " << outcomes[i].unbiased_micro_n1
          << " vs N20 " << outcomes[i].unbiased_micro << "]";
    }
    check(wins >= 2,
          "micro(N=20) > micro(N=1) on only " + std::to_string(wins) +
              "/3 seeds",
          detail);
    if (detail.empty()) detail = "note:" + log.str();
  });

  // ---- 8: determinism through the CLI ---------------------------------------------
  criterion(8, "identical runs produce byte-identical artifacts",
            [](std::string& detail) {
    const std::string spec = tmp_file("spec.json");
    write_bytes(spec, R"({"preset":"desk","seed":1})");
    const std::string data = tmp_file("data.bin");
    check(run_cli("gen-data --spec " + spec + " --out " + data) == 0,
          "gen-data", detail);

    const std::string config = tmp_file("config.json");
    write_bytes(config, R"({"preset":"desk","seed":1,"steps":500})");
    const std::string ckpt1 = tmp_file("m1.json");
    const std::string ckpt2 = tmp_file("m2.json");
    check(run_cli("train --config " + config + " --data " + data + " --out " +
                  ckpt1) == 0,
          "first train", detail);
    check(run_cli("train --config " + config + " --data " + data + " --out " +
                  ckpt2) == 0,
          "second train", detail);
    check(!read_bytes(ckpt1).empty(), "checkpoint missing", detail);
    check(read_bytes(ckpt1) == read_bytes(ckpt2),
          "checkpoints differ between reruns", detail);

    const std::string met1 = tmp_file("met1.json");
    const std::string met2 = tmp_file("met2.json");
    check(run_cli("eval --ckpt " + ckpt1 + " --data " + data +
                  " --mode unbiased --topk 5 --out " + met1) == 0,
          "first eval", detail);
    check(run_cli("eval --ckpt " + ckpt1 + " --data " + data +
                  " --mode unbiased --topk 5 --out " + met2) == 0,
          "second eval", detail);
    check(!read_bytes(met1).empty(), "metrics missing", detail);
    check(read_bytes(met1) == read_bytes(met2),
          "metrics differ between reruns", detail);
  });

  // ---- 9: format robustness through the CLI ------------------------------------------
  criterion(9, "malformed inputs exit with the documented code, no output",
            [](std::string& detail) {
    const std::string good_ckpt = tmp_file("m1.json");  // from criterion 8
    const std::string good_data = tmp_file("data.bin");

    auto expect = [&detail](const std::string& what, const std::string& args,
                            int want, const std::string& out_file) {
      const int rc = run_cli(args);
      check(rc == want,
            what + ": exit " + std::to_string(rc) + " wanted " +
                std::to_string(want),
            detail);
      if (!out_file.empty())
        check(!fs::exists(out_file), what + ": partial output left behind",
              detail);
    };

    // Bad magic.
    const std::string magic = tmp_file("magic.bin");
    write_bytes(magic, "XXXXgarbagegarbagegarbage");
    expect("bad magic", "eval --ckpt " + good_ckpt + " --data " + magic +
                        " --mode biased --out " + tmp_file("out1.json"),
           2, tmp_file("out1.json"));

    // Ragged CSV.
    const std::string ragged = tmp_file("ragged.csv");
    write_bytes(ragged, "id,group,label,f0,f1\n0,0,0,1.0,2.0\n1,0,1,3.0\n");
    expect("ragged csv", "train --config " + tmp_file("config.json") +
                         " --data " + ragged + " --out " +
                         tmp_file("out2.json"),
           2, tmp_file("out2.json"));

    // Truncated binary.
    const std::string bytes = read_bytes(good_data);
    const std::string truncated = tmp_file("trunc.bin");
    write_bytes(truncated, bytes.substr(0, bytes.size() / 3));
    expect("truncated binary", "eval --ckpt " + good_ckpt + " --data " +
                               truncated + " --mode unbiased --out " +
                               tmp_file("out3.json"),
           2, tmp_file("out3.json"));

    // Shape-mismatched checkpoint: desk model (d_in 64) on 4-d data.
    const std::string tiny_spec = tmp_file("tiny_spec.json");
    write_bytes(tiny_spec, R"({
      "fine_means": [[2.0,0.0,0.0,0.0],[0.0,2.0,0.0,0.0]],
      "fine_stddev": [0.3,0.3],
      "fine_counts": [20,20],
      "fine_to_coarse": [0,1],
      "seed": 2
    })");
    const std::string tiny_data = tmp_file("tiny.bin");
    check(run_cli("gen-data --spec " + tiny_spec + " --out " + tiny_data) == 0,
          "tiny gen-data", detail);
    expect("shape mismatch", "eval --ckpt " + good_ckpt + " --data " +
                             tiny_data + " --mode biased --out " +
                             tmp_file("out4.json"),
           2, tmp_file("out4.json"));

    // Tampered checkpoint JSON.
    const std::string broken_ckpt = tmp_file("broken.json");
    const std::string ckpt_bytes = read_bytes(good_ckpt);
    write_bytes(broken_ckpt, ckpt_bytes.substr(0, ckpt_bytes.size() / 2));
    expect("truncated checkpoint", "eval --ckpt " + broken_ckpt + " --data " +
                                   good_data + " --mode biased --out " +
                                   tmp_file("out5.json"),
           2, tmp_file("out5.json"));

    // Missing checkpoint path.
    expect("missing checkpoint", "eval --ckpt " + tmp_file("nope.json") +
                                 " --data " + good_data +
                                 " --mode biased --out " + tmp_file("out6.json"),
           2, tmp_file("out6.json"));

    // Unknown subcommand is a usage error.
    check(run_cli("frobnicate") == 1, "unknown subcommand exit code", detail);
  });

  fs::remove_all(g_tmp);
  if (g_failures == 0) {
    std::printf("acceptance: all criteria PASS\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  return 1;
}
