// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cure/corpus/splits.hpp"
#include "cure/corpus/synthetic.hpp"
#include "cure/encoder/frozen_encoder.hpp"
#include "cure/evaluation/metrics.hpp"
#include "cure/nn/checkpoint.hpp"
#include "cure/pipeline/model.hpp"
#include "cure/pipeline/report.hpp"
#include "cure/pipeline/schedule.hpp"
#include "cure/pipeline/stages.hpp"

namespace cure::pipeline {

/// Full description of one training run. All randomness derives from `seed`
/// through named substreams ("corpus", "split", "model", "train"), so the
/// seeds inside `corpus` and `split` are overwritten during preparation.
struct RunConfig {
  std::uint64_t seed = 1;
  corpus::SyntheticSpec corpus;
  corpus::SplitOptions split;
  encoder::EncoderConfig encoder;  // dim is taken from model.dim
  ModelConfig model;               // n_concepts / n_labels come from the data
  StageSchedule schedule;
  Hyperparameters hp;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Hash of everything that influences training results.
std::uint64_t config_hash(const RunConfig& cfg);

struct PreparedData {
  corpus::SyntheticCorpus corpus;         // generator output with ground truth
  std::vector<corpus::Document> labeled;  // as seen by the splitter
  corpus::DatasetSplit split;
  Dataset<float> train, iid, ood;
  std::vector<std::string> warnings;
};

/// Generates the corpus, labels it offline, splits and embeds.
PreparedData prepare_data(const RunConfig& cfg);

/// Embeds an existing labeled corpus and split.
PreparedData prepare_data(const RunConfig& cfg, std::vector<corpus::Document> labeled,
                          corpus::DatasetSplit split);

/// Copy of `cfg` with the substream seeds applied to corpus and split.
RunConfig with_derived_seeds(const RunConfig& cfg);

/// Model state at a stage boundary.
struct StageSnapshot {
  int completed = 0;  // number of stages finished (0..kStageCount)
  std::vector<nn::ParamBlob> params;
  TrainReport report;
};

struct RunOptions {
  /// Where checkpoints, report.json, metrics.json and curves/ go. Empty
  /// keeps everything in memory.
  std::filesystem::path out_dir;
  /// Continue from the latest stage checkpoint in out_dir whose config hash
  /// matches.
  bool resume = false;
  /// Return after this many stages (simulated interruption).
  int stop_after = kStageCount;
  /// Start from a snapshot instead of from scratch.
  const StageSnapshot* start = nullptr;
  /// Filled with the state after the content extractor stage.
  StageSnapshot* capture_extractor = nullptr;
};

struct RunResult {
  std::unique_ptr<CureModel<float>> model;
  TrainReport report;
  std::optional<evaluation::Metrics> iid, ood;  // absent when stopped early
  int completed = 0;
  int resumed_from = 0;
  std::map<std::string, double> stage_seconds;
  std::map<std::string, std::string> stage_checksums;  // hex parameter hash
};

/// Concept head, content extractor with reversal network, debias module,
/// joint task training. With mode off the first three stages are marked
/// absent and theta trains on raw embeddings.
RunResult run_cure(const RunConfig& cfg, const PreparedData& data, const RunOptions& opts = {});

std::filesystem::path stage_checkpoint_path(const std::filesystem::path& out_dir, int stage);

/// Combined hash of every model parameter.
std::uint64_t model_hash(const CureModel<float>& model);

}  // namespace cure::pipeline
