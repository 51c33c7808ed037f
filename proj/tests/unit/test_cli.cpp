// SPDX-License-Identifier: Apache-2.0
// Drives the built `cure` binary end to end.
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cure/cli/config.hpp"
#include "cure/common/errors.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr
};

Result run_cli(const std::string& args, const std::string& env = {}) {
  const auto log = fs::temp_directory_path() / "cure_cli_test_output.txt";
  const std::string cmd = env + " \"" CURE_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  r.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("validation errors exit 1 and name the key") {
  const auto dir = fresh_dir("cure_cli_bad");
  auto r = run_cli("--set corpus.bias=1.2 generate --out " + dir.string());
  CHECK(r.code == 1);
  CHECK(r.output.find("corpus.bias") != std::string::npos);

  r = run_cli("--set corpus.no_such_key=3 generate --out " + dir.string());
  CHECK(r.code == 1);
  CHECK(r.output.find("corpus.no_such_key") != std::string::npos);

  r = run_cli("--set encoder.dim=32 generate --out " + dir.string());
  CHECK(r.code == 1);

  r = run_cli("frobnicate");
  CHECK(r.code == 1);
  fs::remove_all(dir);
}

TEST_CASE("live backend without a token exits 1 naming the variable") {
  const auto dir = fresh_dir("cure_cli_live");
  REQUIRE(run_cli("generate --out " + dir.string()).code == 0);
  auto r = run_cli("--set labeling.backend=live --set labeling.endpoint=http://127.0.0.1:9/v1 "
                   "--set labeling.model=m --set labeling.auth_env=CURE_TEST_MISSING_TOKEN label --data " +
                       dir.string(),
                   "env -u CURE_TEST_MISSING_TOKEN");
  CHECK(r.code == 1);
  CHECK(r.output.find("CURE_TEST_MISSING_TOKEN") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("generate, label, train and eval produce stable artifacts") {
  const auto a = fresh_dir("cure_cli_a");
  const auto b = fresh_dir("cure_cli_b");
  for (const auto& d : {a, b}) {
    REQUIRE(run_cli("generate --out " + (d / "data").string()).code == 0);
    auto lab = run_cli("label --data " + (d / "data").string());
    REQUIRE(lab.code == 0);
    auto tr = run_cli("train --data " + (d / "data").string() + " --out " + (d / "run").string());
    REQUIRE(tr.code == 0);
    REQUIRE(run_cli("eval --run " + (d / "run").string() + " --data " + (d / "data").string()).code ==
            0);
  }
  for (const char* f : {"data/corpus.jsonl", "data/splits.json", "data/labeled.jsonl",
                        "data/labeling.json", "run/metrics.json", "run/report.json",
                        "run/eval.json", "run/curves/task.csv"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }

  for (const char* f : {"manifest.json", "report.json", "metrics.json", "curves",
                        "checkpoints/stage4_task_head.ckpt"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / "run" / f));
  }
  auto manifest = nlohmann::json::parse(slurp(a / "run/manifest.json"));
  CHECK(manifest["status"] == "finalized");
  CHECK(manifest.contains("config"));
  CHECK(manifest.contains("code_version"));
  CHECK(manifest.contains("stage_checksums"));

  auto eval = nlohmann::json::parse(slurp(a / "run/eval.json"));
  for (const char* split : {"iid", "ood"}) {
    CAPTURE(split);
    REQUIRE(eval.contains(split));
    CHECK(eval[split].contains("accuracy"));
    CHECK(eval[split].contains("macro_f1"));
  }
  // Training on labeled data matches the metrics of evaluating that run.
  auto metrics = nlohmann::json::parse(slurp(a / "run/metrics.json"));
  CHECK(metrics["ood"]["accuracy"] == eval["ood"]["accuracy"]);

  auto labeling = nlohmann::json::parse(slurp(a / "data/labeling.json"));
  CHECK(labeling["ground_truth_agreement"] == 1.0);

  // Warm audit log: a second label pass makes no client calls.
  auto again = run_cli("label --data " + (a / "data").string());
  CHECK(again.code == 0);
  CHECK(again.output.find("client calls 0;") != std::string::npos);
  CHECK(slurp(a / "data/labeled.jsonl") == slurp(b / "data/labeled.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("train with mode off marks the CURE stages absent") {
  const auto dir = fresh_dir("cure_cli_off");
  REQUIRE(run_cli("train --mode off --out " + dir.string()).code == 0);
  auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  for (const char* s : {"concept_head", "content_extractor", "debias"}) {
    CHECK(report["stages"][s] == "absent");
  }
  CHECK(report["stages"]["task_head"] == "completed");
  fs::remove_all(dir);
}

TEST_CASE("train resumes after an interruption") {
  const auto full = fresh_dir("cure_cli_full");
  const auto part = fresh_dir("cure_cli_part");
  REQUIRE(run_cli("train --out " + full.string()).code == 0);
  REQUIRE(run_cli("train --stop-after 2 --out " + part.string()).code == 0);
  CHECK_FALSE(fs::exists(part / "metrics.json"));
  REQUIRE(run_cli("train --resume --out " + part.string()).code == 0);
  CHECK(slurp(full / "metrics.json") == slurp(part / "metrics.json"));
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_CASE("sweep writes one row per cell") {
  const auto dir = fresh_dir("cure_cli_sweep");
  REQUIRE(run_cli("sweep --out " + dir.string()).code == 0);
  CHECK(count_lines(slurp(dir / "sweep_cells.csv")) == 1 + 10 * 5);
  CHECK(count_lines(slurp(dir / "sweep_long.csv")) == 1 + 10 * 5 * 4);
  auto summary = nlohmann::json::parse(slurp(dir / "sweep_summary.json"));
  CHECK_FALSE(summary.empty());
  fs::remove_all(dir);
}

TEST_CASE("ablate writes paired rows and curves") {
  const auto dir = fresh_dir("cure_cli_ablate");
  REQUIRE(run_cli("ablate --seeds 1,2 --out " + dir.string()).code == 0);
  const auto csv = slurp(dir / "ablation.csv");
  CHECK(count_lines(csv) == 1 + 2 * 2);
  CHECK(fs::exists(dir / "ablation_summary.json"));
  CHECK(fs::exists(dir / "curves"));
  fs::remove_all(dir);
}

TEST_CASE("config files load strictly and round-trip") {
  const auto dir = fresh_dir("cure_cli_cfg");
  cure::cli::CliConfig cfg;
  cfg.run.hp.margin = 0.3;
  cfg.run.schedule.task_epochs = 2;
  {
    std::ofstream out(dir / "c.ini");
    out << cure::cli::to_ini(cfg);
  }
  auto back = cure::cli::load_config(dir / "c.ini");
  CHECK(cure::cli::to_json(back) == cure::cli::to_json(cfg));

  {
    std::ofstream out(dir / "bad.ini");
    out << "[hyperparameters]\nmargin = 0.2\nwidth_typo = 3\n";
  }
  try {
    cure::cli::load_config(dir / "bad.ini");
    FAIL("expected ConfigError");
  } catch (const cure::ConfigError& e) {
    CHECK(std::string(e.what()).find("width_typo") != std::string::npos);
  }

  auto r = run_cli("--config " + (dir / "bad.ini").string() + " train --out " + (dir / "run").string());
  CHECK(r.code == 1);
  CHECK(fs::exists(fs::path(CURE_SOURCE_DIR) / "configs/default.ini"));
  CHECK_NOTHROW(cure::cli::load_config(fs::path(CURE_SOURCE_DIR) / "configs/default.ini"));
  fs::remove_all(dir);
}

TEST_CASE("grad-check subcommand passes") {
  auto r = run_cli("grad-check --seeds 2");
  CHECK(r.code == 0);
}

}  // TEST_SUITE
