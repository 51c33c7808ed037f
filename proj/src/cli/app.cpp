// SPDX-License-Identifier: Apache-2.0
#include "cure/cli/app.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "cure/cli/config.hpp"
#include "cure/cli/manifest.hpp"
#include "cure/common/errors.hpp"
#include "cure/diagnostics/grad_cases.hpp"
#include "cure/evaluation/evaluate.hpp"
#include "cure/evaluation/experiments.hpp"
#include "cure/labeling/pipeline.hpp"
#include "cure/pipeline/run.hpp"

namespace cure::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> argv;
};

CliConfig effective_config(const GlobalOptions& g) {
  CliConfig cfg = g.config_path.empty() ? CliConfig{} : load_config(g.config_path);
  for (const auto& o : g.overrides) apply_override(cfg, o);
  if (g.seed) cfg.run.seed = *g.seed;
  if (const char* t = std::getenv("CURE_THREADS"); t != nullptr && *t != '\0') {
    apply_override(cfg, std::string("runtime.workers=") + t);
  }
  cfg.validate();
  return cfg;
}

RunManifest start_manifest(const std::string& command, const GlobalOptions& g,
                           const CliConfig& cfg, std::vector<std::uint64_t> seeds) {
  RunManifest m;
  m.command = command;
  m.argv = g.argv;
  m.config = to_json(cfg);
  m.code_version = code_version();
  m.seeds = std::move(seeds);
  m.platform = platform_fingerprint();
  return m;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void record_outputs(RunManifest& m, const fs::path& root, const std::vector<fs::path>& files) {
  for (const auto& f : files) {
    if (fs::exists(root / f)) m.outputs[f.generic_string()] = file_hash(root / f);
  }
}

// Runs `body` with the manifest marked failed if it throws.
template <typename Fn>
void with_manifest(const fs::path& path, RunManifest& m, Fn body) {
  write_manifest(path, m);
  try {
    body();
  } catch (const std::exception& e) {
    m.status = "failed";
    m.error = e.what();
    write_manifest(path, m);
    throw;
  }
  m.status = "finalized";
  write_manifest(path, m);
}

// ---- generate ---------------------------------------------------------------

void cmd_generate(const GlobalOptions& g, const fs::path& out) {
  const CliConfig cfg = effective_config(g);
  auto m = start_manifest("generate", g, cfg, {cfg.run.seed});
  with_manifest(out / "manifest_generate.json", m, [&] {
    const auto derived = pipeline::with_derived_seeds(cfg.run);
    auto data = pipeline::prepare_data(cfg.run);
    corpus::write_jsonl(out / "corpus.jsonl", data.corpus.documents);
    write_file(out / "generator.json", corpus::to_json(data.corpus.metadata).dump(2) + "\n");
    corpus::write_split_manifest(out / "splits.json", data.split);
    record_outputs(m, out, {"corpus.jsonl", "generator.json", "splits.json"});
    std::cout << "generated " << data.corpus.documents.size() << " documents (corpus seed "
              << derived.corpus.seed << "); train " << data.split.train.size() << ", iid "
              << data.split.iid_test.size() << ", ood " << data.split.ood_test.size() << "\n";
  });
}

// ---- label ------------------------------------------------------------------

void cmd_label(const GlobalOptions& g, const fs::path& data_dir, std::string backend,
               std::string audit_path) {
  CliConfig cfg = effective_config(g);
  if (!backend.empty()) cfg.labeling.backend = backend;
  cfg.validate();

  // Build the client first: a live backend without credentials must fail
  // before anything is read or written.
  std::unique_ptr<labeling::AnnotatorClient> client;
  std::optional<corpus::GeneratorMetadata> meta;
  if (cfg.labeling.backend == "live") {
    client = std::make_unique<labeling::LiveClient>(cfg.labeling.live);
  } else {
    meta = corpus::generator_metadata_from_json(read_json(data_dir / "generator.json"));
    client = std::make_unique<labeling::OfflineClient>(*meta);
  }

  auto m = start_manifest("label", g, cfg, {cfg.run.seed});
  with_manifest(data_dir / "manifest_label.json", m, [&] {
    const auto docs = corpus::read_jsonl(data_dir / "corpus.jsonl");
    labeling::AuditLog log(audit_path.empty() ? data_dir / "audit.jsonl" : fs::path(audit_path));
    labeling::Annotator annotator(*client, log, cfg.labeling.retry);
    auto outcome = labeling::run_labeling(docs, annotator, {cfg.labeling.concurrency});

    std::size_t agree = 0, with_truth = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!docs[i].concept_label) continue;
      ++with_truth;
      agree += outcome.docs[i].concept_label == docs[i].concept_label ? 1 : 0;
    }
    auto summary = labeling::summary_json(outcome);
    summary.erase("client_calls");
    summary.erase("cache_hits");
    summary["documents"] = docs.size();
    summary["ground_truth_agreement"] =
        with_truth ? static_cast<double>(agree) / static_cast<double>(with_truth) : 0.0;

    corpus::write_jsonl(data_dir / "labeled.jsonl", outcome.docs);
    write_file(data_dir / "labeling.json", summary.dump(2) + "\n");
    const auto derived = pipeline::with_derived_seeds(cfg.run);
    corpus::write_split_manifest(data_dir / "splits.json",
                                 corpus::build_splits(outcome.docs, derived.split));
    record_outputs(m, data_dir, {"labeled.jsonl", "labeling.json", "splits.json"});
    m.stage_checksums["client_calls"] = std::to_string(outcome.client_calls);
    m.stage_checksums["cache_hits"] = std::to_string(outcome.cache_hits);
    std::cout << "labeled " << docs.size() << " documents into " << outcome.concepts.size()
              << " concepts; " << outcome.errors.size() << " unknown; agreement "
              << summary["ground_truth_agreement"].get<double>() << "; client calls "
              << outcome.client_calls << "; cache hits " << outcome.cache_hits << "\n";
  });
}

// ---- shared data loading ----------------------------------------------------

pipeline::PreparedData load_data(const CliConfig& cfg, const std::string& data_dir) {
  if (data_dir.empty()) return pipeline::prepare_data(cfg.run);
  const fs::path dir(data_dir);
  const fs::path labeled = fs::exists(dir / "labeled.jsonl") ? dir / "labeled.jsonl"
                                                             : dir / "corpus.jsonl";
  auto docs = corpus::read_jsonl(labeled);
  auto split = corpus::split_from_manifest(read_json(dir / "splits.json"), docs);
  return pipeline::prepare_data(cfg.run, std::move(docs), std::move(split));
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string out;
  std::string mode;
  std::optional<double> margin;
  bool resume = false;
  int stop_after = pipeline::kStageCount;
};

void cmd_train(const GlobalOptions& g, const TrainArgs& a) {
  CliConfig cfg = effective_config(g);
  if (!a.mode.empty()) cfg.run.hp.mode = pipeline::mode_from_string(a.mode);
  if (a.margin) cfg.run.hp.margin = *a.margin;
  cfg.validate();
  const fs::path out(a.out);
  auto m = start_manifest("train", g, cfg, {cfg.run.seed});
  with_manifest(out / "manifest.json", m, [&] {
    auto data = load_data(cfg, a.data_dir);
    pipeline::RunOptions ro;
    ro.out_dir = out;
    ro.resume = a.resume;
    ro.stop_after = a.stop_after;
    auto res = pipeline::run_cure(cfg.run, data, ro);
    m.stage_checksums = res.stage_checksums;
    m.stage_seconds = res.stage_seconds;
    std::vector<fs::path> files{"report.json", "metrics.json"};
    for (int s = 1; s <= pipeline::kStageCount; ++s) {
      files.push_back(fs::relative(pipeline::stage_checkpoint_path(out, s), out));
    }
    record_outputs(m, out, files);
    std::cout << "mode " << pipeline::to_string(cfg.run.hp.mode) << ": completed "
              << res.completed << "/" << pipeline::kStageCount << " stages";
    if (res.resumed_from > 0) std::cout << " (resumed after stage " << res.resumed_from << ")";
    if (res.iid && res.ood) {
      std::cout << "; iid accuracy " << res.iid->accuracy << ", ood accuracy " << res.ood->accuracy;
    }
    std::cout << "\n";
  });
}

// ---- eval -------------------------------------------------------------------

void cmd_eval(const GlobalOptions& g, const std::string& run_dir, const std::string& data_dir,
              std::string out_path) {
  const fs::path run(run_dir);
  const auto trained = read_manifest(run / "manifest.json");
  if (trained.status != "finalized") {
    throw ConfigError("run " + run.string() + " has not finished (status " + trained.status + ")");
  }
  CliConfig cfg = cli_config_from_json(trained.config);
  cfg.validate();
  const auto ckpt_path = pipeline::stage_checkpoint_path(run, pipeline::kStageCount);
  auto ckpt = nn::load_checkpoint(ckpt_path);
  if (ckpt.metadata.value("config_hash", "") != hex64(pipeline::config_hash(cfg.run))) {
    throw ConfigError(ckpt_path.string() + " does not belong to the run's configuration");
  }
  if (out_path.empty()) out_path = (run / "eval.json").string();

  auto m = start_manifest("eval", g, cfg, {cfg.run.seed});
  with_manifest(run / "manifest_eval.json", m, [&] {
    auto data = load_data(cfg, data_dir);
    pipeline::ModelConfig mc = cfg.run.model;
    mc.n_concepts = data.split.concepts.size();
    mc.n_labels = static_cast<std::size_t>(data.split.n_labels);
    pipeline::CureModel<float> model(mc, substream_seed(cfg.run.seed, "model"));
    nn::restore(model.parameters(), ckpt.params);
    const auto mode = cfg.run.hp.mode;
    const auto iid = evaluation::evaluate(model, data.iid, mode);
    const auto ood = evaluation::evaluate(model, data.ood, mode);
    nlohmann::json j = {{"mode", pipeline::to_string(mode)},
                        {"margin", cfg.run.hp.margin},
                        {"seed", cfg.run.seed},
                        {"iid", evaluation::to_json(iid)},
                        {"ood", evaluation::to_json(ood)}};
    write_file(out_path, j.dump(2) + "\n");
    m.outputs[fs::path(out_path).filename().string()] = file_hash(out_path);
    std::cout << "iid accuracy " << iid.accuracy << " macro-F1 " << iid.macro_f1
              << "; ood accuracy " << ood.accuracy << " macro-F1 " << ood.macro_f1 << "\n";
  });
}

// ---- sweep / ablate ---------------------------------------------------------

void cmd_sweep(const GlobalOptions& g, const std::string& out_dir, const std::string& margins,
               const std::string& seeds, const std::string& modes, bool keep_runs) {
  CliConfig cfg = effective_config(g);
  if (!margins.empty()) apply_override(cfg, "sweep.margins=" + margins);
  if (!seeds.empty()) apply_override(cfg, "sweep.seeds=" + seeds);
  if (!modes.empty()) apply_override(cfg, "sweep.modes=" + modes);
  cfg.validate();
  const fs::path out(out_dir);
  std::vector<pipeline::Mode> mode_list;
  for (const auto& s : cfg.sweep.modes) mode_list.push_back(pipeline::mode_from_string(s));

  auto m = start_manifest("sweep", g, cfg, cfg.sweep.seeds);
  with_manifest(out / "manifest.json", m, [&] {
    evaluation::ExperimentOptions eo;
    eo.workers = cfg.workers;
    if (keep_runs) eo.out_dir = out / "runs";
    auto r = evaluation::margin_sweep(cfg.run, mode_list, cfg.sweep.margins, cfg.sweep.seeds, eo);
    write_file(out / "sweep_cells.csv", evaluation::sweep_cells_csv(r));
    write_file(out / "sweep_long.csv", evaluation::sweep_long_csv(r));
    const auto summary = evaluation::sweep_summary(r);
    write_file(out / "sweep_summary.json", summary.dump(2) + "\n");
    record_outputs(m, out, {"sweep_cells.csv", "sweep_long.csv", "sweep_summary.json"});
    std::cout << r.cells.size() << " cells, " << summary["failed_cells"].get<std::size_t>()
              << " failed\n";
    for (auto mode : mode_list) {
      for (double mm : cfg.sweep.margins) {
        std::cout << "  " << pipeline::to_string(mode) << " M=" << evaluation::format_double(mm)
                  << " iid " << evaluation::mean_accuracy(r, mode, mm, "iid") << " ood "
                  << evaluation::mean_accuracy(r, mode, mm, "ood") << "\n";
      }
    }
  });
}

void cmd_ablate(const GlobalOptions& g, const std::string& out_dir, const std::string& seeds) {
  CliConfig cfg = effective_config(g);
  if (!seeds.empty()) apply_override(cfg, "sweep.seeds=" + seeds);
  cfg.validate();
  const fs::path out(out_dir);
  auto m = start_manifest("ablate", g, cfg, cfg.sweep.seeds);
  with_manifest(out / "manifest.json", m, [&] {
    evaluation::ExperimentOptions eo;
    eo.workers = cfg.workers;
    auto r = evaluation::ablation_reversal(cfg.run, cfg.sweep.seeds, eo);
    write_file(out / "ablation.csv", evaluation::ablation_csv(r));
    const auto summary = evaluation::ablation_summary(r);
    write_file(out / "ablation_summary.json", summary.dump(2) + "\n");
    std::vector<fs::path> files{"ablation.csv", "ablation_summary.json"};
    for (const auto& row : r.rows) {
      if (!row.error.empty()) continue;
      const std::string sub = std::string(row.with_reversal ? "with_reversal" : "without_reversal") +
                              "_s" + std::to_string(row.seed);
      pipeline::write_curves_csv(out / "curves" / sub, row.report);
    }
    record_outputs(m, out, files);
    std::cout << "ood accuracy with reversal " << summary["mean_ood_accuracy_with"]
              << ", without " << summary["mean_ood_accuracy_without"]
              << "; output variance with " << summary["mean_output_variance_with"] << ", without "
              << summary["mean_output_variance_without"] << "\n";
  });
}

// ---- grad-check -------------------------------------------------------------

void cmd_grad_check(int seeds, double tolerance) {
  if (seeds < 1) throw ConfigError("grad-check --seeds must be at least 1");
  std::size_t failures = 0;
  for (const auto& c : diagnostics::all_grad_cases()) {
    double worst = 0.0;
    for (int s = 1; s <= seeds; ++s) worst = std::max(worst, c.run(static_cast<std::uint64_t>(s)));
    const bool ok = worst < tolerance;
    failures += ok ? 0 : 1;
    std::cout << (ok ? "ok   " : "FAIL ") << c.name << "  max rel err " << worst << "\n";
  }
  if (failures > 0) {
    throw ContractError(std::to_string(failures) + " gradient checks exceeded " +
                        evaluation::format_double(tolerance));
  }
}

}  // namespace

int run_app(int argc, const char* const* argv) {
  CLI::App app{"Concept-level shortcut removal and enhancement experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);
  app.add_option("-c,--config,--spec", g.config_path, "INI config file");
  app.add_option("--set", g.overrides, "Override a config key: section.key=value");
  app.add_option("--seed", g.seed, "Root seed");

  std::string out, data_dir, backend, audit, mode, run_dir, margins, seeds, modes;
  std::optional<double> margin;
  bool resume = false, keep_runs = false;
  int stop_after = pipeline::kStageCount, gc_seeds = 20;
  double tolerance = 1e-5;

  auto* gen = app.add_subcommand("generate", "Generate the synthetic corpus and its split");
  gen->add_option("-o,--out", out, "Output directory")->required();

  auto* lab = app.add_subcommand("label", "Annotate concepts (clean, label, merge, assign)");
  lab->add_option("-d,--data", data_dir, "Directory written by generate")->required();
  lab->add_option("--backend", backend, "offline or live");
  lab->add_option("--audit", audit, "Audit log path (default <data>/audit.jsonl)");

  auto* tr = app.add_subcommand("train", "Run every training stage");
  tr->add_option("-d,--data", data_dir, "Data directory (default: generate in memory)");
  tr->add_option("-o,--out", out, "Run directory")->required();
  tr->add_option("--mode", mode, "off, removal or enhancement");
  tr->add_option("--margin", margin, "Margin M in [0, 1]");
  tr->add_flag("--resume", resume, "Continue from the latest stage checkpoint");
  tr->add_option("--stop-after", stop_after, "Stop after this many stages")
      ->check(CLI::Range(1, pipeline::kStageCount));

  auto* ev = app.add_subcommand("eval", "Evaluate a trained run on the iid and OOD tests");
  ev->add_option("-r,--run", run_dir, "Run directory written by train")->required();
  ev->add_option("-d,--data", data_dir, "Data directory (default: regenerate)");
  ev->add_option("-o,--out", out, "Output JSON (default <run>/eval.json)");

  auto* sw = app.add_subcommand("sweep", "Margin sweep over modes, margins and seeds");
  sw->add_option("-o,--out", out, "Output directory")->required();
  sw->add_option("--margins", margins, "Comma-separated margins");
  sw->add_option("--seeds", seeds, "Comma-separated root seeds");
  sw->add_option("--modes", modes, "Comma-separated modes");
  sw->add_flag("--keep-runs", keep_runs, "Keep per-cell checkpoints and reports");

  auto* ab = app.add_subcommand("ablate", "Paired runs with and without the reversal network");
  ab->add_option("-o,--out", out, "Output directory")->required();
  ab->add_option("--seeds", seeds, "Comma-separated root seeds");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every op and layer");
  gc->add_option("--seeds", gc_seeds, "Seeds per case");
  gc->add_option("--tolerance", tolerance, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (gen->parsed()) cmd_generate(g, out);
    if (lab->parsed()) cmd_label(g, data_dir, backend, audit);
    if (tr->parsed()) cmd_train(g, {data_dir, out, mode, margin, resume, stop_after});
    if (ev->parsed()) cmd_eval(g, run_dir, data_dir, out);
    if (sw->parsed()) cmd_sweep(g, out, margins, seeds, modes, keep_runs);
    if (ab->parsed()) cmd_ablate(g, out, seeds);
    if (gc->parsed()) cmd_grad_check(gc_seeds, tolerance);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kRuntime);
  }
  return 0;
}

}  // namespace cure::cli
