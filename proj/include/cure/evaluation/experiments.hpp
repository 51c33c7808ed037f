// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cure/evaluation/metrics.hpp"
#include "cure/pipeline/run.hpp"

namespace cure::evaluation {

struct SweepCell {
  pipeline::Mode mode = pipeline::Mode::kRemoval;
  double margin = 0.0;
  std::uint64_t seed = 0;
  std::optional<Metrics> iid, ood;
  std::string error;  // non-empty if the cell failed
};

struct SweepResult {
  std::vector<pipeline::Mode> modes;
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;  // mode-major, then margin, then seed
};

struct ExperimentOptions {
  int workers = 1;  // seeds run in parallel up to this many threads
  /// When set, each cell's run directory goes under here.
  std::filesystem::path out_dir;
};

/// The default grid {0, 0.1, ..., 0.9}.
std::vector<double> default_margin_grid();

/// Runs every (mode, M, seed) cell. The concept head and content extractor do
/// not depend on M or the mode, so they are trained once per seed and shared.
/// A failing cell is recorded and the grid continues. Throws ConfigError for
/// M outside [0, 1] or mode off.
SweepResult margin_sweep(const pipeline::RunConfig& base, const std::vector<pipeline::Mode>& modes,
                         const std::vector<double>& grid, const std::vector<std::uint64_t>& seeds,
                         const ExperimentOptions& opts = {});

/// Seed-averaged accuracy for (mode, M, split); NaN if no cell succeeded.
double mean_accuracy(const SweepResult& r, pipeline::Mode mode, double margin,
                     const std::string& split);

/// One row per cell: mode,margin,seed,iid_accuracy,iid_macro_f1,ood_accuracy,ood_macro_f1,error
std::string sweep_cells_csv(const SweepResult& r);
/// Plot-ready long format: mode,M,seed,split,metric,value
std::string sweep_long_csv(const SweepResult& r);
nlohmann::json sweep_summary(const SweepResult& r);

struct AblationRow {
  std::uint64_t seed = 0;
  bool with_reversal = true;
  std::optional<Metrics> iid, ood;
  double output_variance = 0.0;  // of phi(x) over train rows
  double final_concept_loss = 0.0;
  double final_content_loss = 0.0;
  pipeline::TrainReport report;
  std::string error;
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // per seed: with, then without
};

/// Paired runs per seed with and without the reversal network. The
/// "without" variant trains phi on the concept dropout loss alone.
AblationResult ablation_reversal(const pipeline::RunConfig& base,
                                 const std::vector<std::uint64_t>& seeds,
                                 const ExperimentOptions& opts = {});

std::string ablation_csv(const AblationResult& r);
nlohmann::json ablation_summary(const AblationResult& r);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace cure::evaluation
