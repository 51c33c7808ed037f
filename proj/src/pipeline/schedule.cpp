// SPDX-License-Identifier: Apache-2.0
#include "cure/pipeline/schedule.hpp"

#include <cmath>
#include <sstream>

#include "cure/common/errors.hpp"

namespace cure::pipeline {

namespace {

template <typename V>
void require(bool ok, const char* field, const char* rule, V value) {
  if (ok) return;
  std::ostringstream os;
  os << field << " " << rule << ", got " << value;
  throw ConfigError(os.str());
}

}  // namespace

void StageSchedule::validate() const {
  require(concept_epochs >= 0, "schedule.concept_epochs", "must be non-negative", concept_epochs);
  require(extractor_epochs >= 0, "schedule.extractor_epochs", "must be non-negative", extractor_epochs);
  require(debias_epochs >= 0, "schedule.debias_epochs", "must be non-negative", debias_epochs);
  require(task_epochs >= 0, "schedule.task_epochs", "must be non-negative", task_epochs);
  require(batch_size >= 1, "schedule.batch_size", "must be at least 1", batch_size);
  require(lr_extractor > 0.0, "schedule.lr_extractor", "must be positive", lr_extractor);
  require(lr_heads > 0.0, "schedule.lr_heads", "must be positive", lr_heads);
  require(weight_decay >= 0.0, "schedule.weight_decay", "must be non-negative", weight_decay);
  require(alternation >= 1, "schedule.alternation", "must be at least 1", alternation);
}

nlohmann::json to_json(const StageSchedule& s) {
  return {{"concept_epochs", s.concept_epochs}, {"extractor_epochs", s.extractor_epochs},
          {"debias_epochs", s.debias_epochs},   {"task_epochs", s.task_epochs},
          {"batch_size", s.batch_size},         {"lr_extractor", s.lr_extractor},
          {"lr_heads", s.lr_heads},             {"weight_decay", s.weight_decay},
          {"alternation", s.alternation}};
}

StageSchedule stage_schedule_from_json(const nlohmann::json& j) {
  StageSchedule s;
  s.concept_epochs = j.value("concept_epochs", s.concept_epochs);
  s.extractor_epochs = j.value("extractor_epochs", s.extractor_epochs);
  s.debias_epochs = j.value("debias_epochs", s.debias_epochs);
  s.task_epochs = j.value("task_epochs", s.task_epochs);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.lr_extractor = j.value("lr_extractor", s.lr_extractor);
  s.lr_heads = j.value("lr_heads", s.lr_heads);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.alternation = j.value("alternation", s.alternation);
  return s;
}

void Hyperparameters::validate() const {
  require(std::isfinite(tau), "model.tau", "must be finite", tau);
  require(lambda >= 0.0, "model.lambda", "must be non-negative", lambda);
  require(margin >= 0.0 && margin <= 1.0, "model.margin", "must lie in [0, 1]", margin);
  require(joint_margin_weight >= 0.0, "model.joint_margin_weight", "must be non-negative",
          joint_margin_weight);
}

nlohmann::json to_json(const Hyperparameters& h) {
  return {{"tau", h.tau},
          {"lambda", h.lambda},
          {"margin", h.margin},
          {"mode", to_string(h.mode)},
          {"use_reversal", h.use_reversal},
          {"joint_margin_weight", h.joint_margin_weight}};
}

Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
  Hyperparameters h;
  h.tau = j.value("tau", h.tau);
  h.lambda = j.value("lambda", h.lambda);
  h.margin = j.value("margin", h.margin);
  h.mode = mode_from_string(j.value("mode", std::string(to_string(h.mode))));
  h.use_reversal = j.value("use_reversal", h.use_reversal);
  h.joint_margin_weight = j.value("joint_margin_weight", h.joint_margin_weight);
  return h;
}

}  // namespace cure::pipeline
