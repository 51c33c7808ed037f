// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include <json.hpp>

#include "cure/pipeline/model.hpp"

namespace cure::pipeline {

struct StageSchedule {
  int concept_epochs = 5;
  int extractor_epochs = 5;
  int debias_epochs = 5;
  int task_epochs = 5;
  std::size_t batch_size = 16;
  double lr_extractor = 1e-4;  // phi and phi_hat
  double lr_heads = 3e-4;      // omega, theta and psi
  double weight_decay = 0.01;
  int alternation = 1;  // reversal steps per extractor step

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const StageSchedule& s);
StageSchedule stage_schedule_from_json(const nlohmann::json& j);

struct Hyperparameters {
  double tau = 1.0;
  double lambda = 1.0;
  double margin = 0.0;
  Mode mode = Mode::kRemoval;
  /// false trains phi on the concept dropout loss alone and never trains
  /// phi_hat (reversal ablation).
  bool use_reversal = true;
  /// Weight of the margin loss kept alongside cross-entropy while theta and
  /// psi train jointly. 0 trains the joint stage on cross-entropy alone.
  double joint_margin_weight = 0.0;

  void validate() const;
};

nlohmann::json to_json(const Hyperparameters& h);
Hyperparameters hyperparameters_from_json(const nlohmann::json& j);

/// Fraction of train pairs whose hinge term must be exactly zero for the
/// debias stage to stop early.
inline constexpr double kHingeSatisfiedFraction = 0.95;

/// Loss magnitude treated as divergence.
inline constexpr double kDivergenceThreshold = 1e3;

}  // namespace cure::pipeline
