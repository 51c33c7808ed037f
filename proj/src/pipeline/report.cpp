// SPDX-License-Identifier: Apache-2.0
#include "cure/pipeline/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "cure/common/errors.hpp"
#include "cure/pipeline/model.hpp"

namespace cure::pipeline {

const char* to_string(StageStatus s) {
  switch (s) {
    case StageStatus::kPending: return "pending";
    case StageStatus::kCompleted: return "completed";
    case StageStatus::kSkipped: return "absent";
  }
  return "?";
}

namespace {
StageStatus status_from_string(const std::string& s) {
  if (s == "completed") return StageStatus::kCompleted;
  if (s == "absent") return StageStatus::kSkipped;
  return StageStatus::kPending;
}
}  // namespace

double TrainReport::last_epoch_value(const std::string& stage, const std::string& key) const {
  for (auto it = epochs.rbegin(); it != epochs.rend(); ++it) {
    if (it->stage != stage) continue;
    auto v = it->values.find(key);
    if (v != it->values.end()) return v->second;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j;
  j["curves"] = r.curves;
  auto& epochs = j["epochs"] = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"stage", e.stage}, {"epoch", e.epoch}, {"values", e.values}});
  }
  j["warnings"] = r.warnings;
  auto& stages = j["stages"] = nlohmann::json::object();
  for (const auto& [name, s] : r.stages) stages[name] = to_string(s);
  j["degenerate_cosines"] = r.degenerate_cosines;
  j["parameter_counts"] = r.parameter_counts;
  j["final_metrics"] = r.final_metrics;
  return j;
}

TrainReport train_report_from_json(const nlohmann::json& j) {
  TrainReport r;
  r.curves = j.at("curves").get<std::map<std::string, std::vector<double>>>();
  for (const auto& e : j.at("epochs")) {
    r.epochs.push_back({e.at("stage").get<std::string>(), e.at("epoch").get<int>(),
                        e.at("values").get<std::map<std::string, double>>()});
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& [name, s] : j.at("stages").items()) r.stages[name] = status_from_string(s.get<std::string>());
  r.degenerate_cosines = j.value("degenerate_cosines", std::size_t{0});
  r.parameter_counts = j.value("parameter_counts", nlohmann::json::object());
  r.final_metrics = j.value("final_metrics", nlohmann::json::object());
  return r;
}

void write_curves_csv(const std::filesystem::path& dir, const TrainReport& r) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, values] : r.curves) {
    std::ofstream out(dir / (name + ".csv"));
    if (!out) throw IoError("cannot write curve " + (dir / name).string());
    out.precision(9);
    out << "step,loss\n";
    for (std::size_t i = 0; i < values.size(); ++i) out << (i + 1) << ',' << values[i] << '\n';
  }
}

nlohmann::json parameter_count_report(std::size_t dim) {
  const auto here = parameter_counts(dim);
  const auto wide = parameter_counts(768);
  constexpr double kExtractorReference = 1.78e6;
  constexpr double kDebiasReference = 1.18e6;
  return {
      {"dim", dim},
      {"extractor", here.extractor},
      {"debias", here.debias},
      {"width_768",
       {{"extractor", wide.extractor},
        {"debias", wide.debias},
        {"extractor_reference", kExtractorReference},
        {"debias_reference", kDebiasReference},
        {"extractor_ratio", static_cast<double>(wide.extractor) / kExtractorReference},
        {"debias_ratio", static_cast<double>(wide.debias) / kDebiasReference}}},
      {"note",
       "The reference counts (~1.78M extractor, ~1.18M debias module at width 768) do not pin "
       "down internal widths. Here the extractor's attention and feed-forward path runs at "
       "width d/6 and the SwiGLU hidden width is d/3; with full-width attention and a 1x "
       "feed-forward the extractor would have about 4.7M parameters."}};
}

}  // namespace cure::pipeline
