// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace cure::pipeline {

/// Stage names in execution order.
inline constexpr const char* kStageNames[] = {"concept_head", "content_extractor", "debias",
                                              "task_head"};
inline constexpr int kStageCount = 4;

enum class StageStatus { kPending, kCompleted, kSkipped };

struct EpochRecord {
  std::string stage;
  int epoch = 0;  // 0 = before the first epoch
  std::map<std::string, double> values;
};

/// Everything a run logs. Curves hold one value per optimizer step of the
/// named loss; steps are implicit (1-based position).
struct TrainReport {
  std::map<std::string, std::vector<double>> curves;
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  std::map<std::string, StageStatus> stages;
  std::size_t degenerate_cosines = 0;
  nlohmann::json parameter_counts = nlohmann::json::object();
  nlohmann::json final_metrics = nlohmann::json::object();

  void log(const std::string& curve, double value) { curves[curve].push_back(value); }
  void log_epoch(const std::string& stage, int epoch, std::map<std::string, double> values) {
    epochs.push_back({stage, epoch, std::move(values)});
  }
  /// Last value of an epoch-level metric for `stage`, or NaN.
  double last_epoch_value(const std::string& stage, const std::string& key) const;
};

const char* to_string(StageStatus s);

nlohmann::json to_json(const TrainReport& r);
TrainReport train_report_from_json(const nlohmann::json& j);

/// One CSV per curve at <dir>/<curve>.csv with header "step,loss".
void write_curves_csv(const std::filesystem::path& dir, const TrainReport& r);

/// Parameter counts of phi and psi at `dim` and at width 768, plus a note on
/// the architecture ambiguity behind the comparison.
nlohmann::json parameter_count_report(std::size_t dim);

}  // namespace cure::pipeline
