// SPDX-License-Identifier: Apache-2.0
#include "cure/pipeline/run.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "cure/common/errors.hpp"
#include "cure/common/hash.hpp"
#include "cure/evaluation/evaluate.hpp"
#include "cure/labeling/pipeline.hpp"

namespace cure::pipeline {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  corpus.validate();
  if (split.k < 1) throw ConfigError("split.k must be at least 1");
  if (!(split.iid_holdout_fraction > 0.0 && split.iid_holdout_fraction < 1.0)) {
    throw ConfigError("split.iid_holdout_fraction must lie in (0, 1)");
  }
  if (model.dim < 2) throw ConfigError("model.dim must be at least 2");
  if (encoder.buckets < 1) throw ConfigError("encoder.buckets must be positive");
  if (!(model.residual_init >= 0.0)) throw ConfigError("model.residual_init must be >= 0");
  schedule.validate();
  hp.validate();
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {{"seed", cfg.seed},
          {"corpus", corpus::to_json(cfg.corpus)},
          {"split", {{"k", cfg.split.k}, {"iid_holdout_fraction", cfg.split.iid_holdout_fraction}}},
          {"encoder", encoder::to_json(cfg.encoder)},
          {"model", to_json(cfg.model)},
          {"schedule", to_json(cfg.schedule)},
          {"hyperparameters", to_json(cfg.hp)}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("corpus")) cfg.corpus = corpus::synthetic_spec_from_json(j["corpus"]);
  if (j.contains("split")) {
    cfg.split.k = j["split"].value("k", cfg.split.k);
    cfg.split.iid_holdout_fraction =
        j["split"].value("iid_holdout_fraction", cfg.split.iid_holdout_fraction);
  }
  if (j.contains("encoder")) cfg.encoder = encoder::encoder_config_from_json(j["encoder"]);
  if (j.contains("model")) cfg.model = model_config_from_json(j["model"]);
  if (j.contains("schedule")) cfg.schedule = stage_schedule_from_json(j["schedule"]);
  if (j.contains("hyperparameters")) cfg.hp = hyperparameters_from_json(j["hyperparameters"]);
  return cfg;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(to_json(cfg).dump()); }

RunConfig with_derived_seeds(const RunConfig& cfg) {
  RunConfig out = cfg;
  out.corpus.seed = substream_seed(cfg.seed, "corpus");
  out.split.seed = substream_seed(cfg.seed, "split");
  out.encoder.dim = cfg.model.dim;
  return out;
}

namespace {

Dataset<float> embed_part(const encoder::FrozenEncoder& enc,
                          const std::vector<corpus::Document>& docs,
                          const std::vector<std::string>& concepts, const char* part,
                          std::vector<std::string>& warnings) {
  Dataset<float> d;
  auto texts = corpus::texts_of(docs);
  encoder::EmbedReport rep;
  d.x = enc.embed<float>(texts, &rep);
  for (auto row : rep.null_rows) {
    warnings.push_back(std::string("encoder: ") + part + " document " + docs[row].id +
                       " has no tokens; using the null embedding");
  }
  d.labels = corpus::labels_of(docs);
  for (const auto& doc : docs) {
    auto it = std::find(concepts.begin(), concepts.end(), doc.concept_label.value_or(""));
    if (it == concepts.end()) {
      throw LabelingIncompleteError("document " + doc.id + " has a concept outside the inventory");
    }
    d.concepts.push_back(static_cast<int>(it - concepts.begin()));
  }
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg, std::vector<corpus::Document> labeled,
                          corpus::DatasetSplit split) {
  const RunConfig c = with_derived_seeds(cfg);
  PreparedData out;
  out.labeled = std::move(labeled);
  out.split = std::move(split);
  out.warnings = out.split.warnings;
  encoder::FrozenEncoder enc(c.encoder);
  out.train = embed_part(enc, out.split.train, out.split.concepts, "train", out.warnings);
  out.iid = embed_part(enc, out.split.iid_test, out.split.concepts, "iid", out.warnings);
  out.ood = embed_part(enc, out.split.ood_test, out.split.concepts, "ood", out.warnings);
  return out;
}

PreparedData prepare_data(const RunConfig& cfg) {
  cfg.validate();
  const RunConfig c = with_derived_seeds(cfg);
  auto generated = corpus::generate_synthetic(c.corpus);
  auto unlabeled = generated.documents;
  for (auto& d : unlabeled) d.concept_label.reset();
  auto labeled = labeling::offline_annotate(unlabeled, generated.metadata);
  auto split = corpus::build_splits(labeled, c.split);
  auto out = prepare_data(cfg, std::move(labeled), std::move(split));
  out.corpus = std::move(generated);
  return out;
}

fs::path stage_checkpoint_path(const fs::path& out_dir, int stage) {
  return out_dir / "checkpoints" /
         ("stage" + std::to_string(stage) + "_" + kStageNames[stage - 1] + ".ckpt");
}

std::uint64_t model_hash(const CureModel<float>& model) {
  std::uint64_t h = kFnvOffset;
  for (Part p : kAllParts) h = mix64(h ^ model.part_hash(p));
  return h;
}

RunResult run_cure(const RunConfig& cfg, const PreparedData& data, const RunOptions& opts) {
  cfg.validate();
  ModelConfig mc = cfg.model;
  mc.n_concepts = data.split.concepts.size();
  mc.n_labels = static_cast<std::size_t>(data.split.n_labels);
  const std::uint64_t train_seed = substream_seed(cfg.seed, "train");
  const std::string hash = hex64(config_hash(cfg));
  const bool persist = !opts.out_dir.empty();

  RunResult res;
  res.model = std::make_unique<CureModel<float>>(mc, substream_seed(cfg.seed, "model"));
  CureModel<float>& model = *res.model;
  TrainReport& report = res.report;

  int done = 0;
  if (opts.start != nullptr) {
    nn::restore(model.parameters(), opts.start->params);
    report = opts.start->report;
    done = opts.start->completed;
  } else if (opts.resume && persist) {
    for (int s = kStageCount; s >= 1 && done == 0; --s) {
      const auto path = stage_checkpoint_path(opts.out_dir, s);
      if (!fs::exists(path)) continue;
      auto ckpt = nn::load_checkpoint(path);
      if (ckpt.metadata.value("config_hash", "") != hash) continue;
      nn::restore(model.parameters(), ckpt.params);
      report = train_report_from_json(ckpt.metadata.at("report"));
      done = s;
    }
  }
  res.resumed_from = done;
  if (done == 0) {
    report = TrainReport{};
    report.warnings = data.warnings;
    report.parameter_counts = parameter_count_report(mc.dim);
    for (const char* name : kStageNames) report.stages[name] = StageStatus::kPending;
  }
  res.completed = done;

  const bool baseline = cfg.hp.mode == Mode::kOff;
  const EvalSets<float> eval{&data.iid, &data.ood};
  const int last = std::min(kStageCount, opts.stop_after);
  for (int s = done + 1; s <= last; ++s) {
    const std::string name = kStageNames[s - 1];
    const auto t0 = std::chrono::steady_clock::now();
    if (baseline && s < kStageCount) {
      report.stages[name] = StageStatus::kSkipped;
      res.completed = s;
      continue;
    }
    switch (s) {
      case 1: train_concept_head(model, data.train, cfg.schedule, train_seed, report); break;
      case 2: train_content_extractor(model, data.train, cfg.schedule, cfg.hp, train_seed, report); break;
      case 3: train_debias(model, data.train, cfg.schedule, cfg.hp, train_seed, report); break;
      default:
        train_task_head(model, data.train, cfg.schedule, cfg.hp, train_seed, report, eval);
        break;
    }
    report.stages[name] = StageStatus::kCompleted;
    res.stage_seconds[name] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.stage_checksums[name] = hex64(model_hash(model));
    res.completed = s;
    if (persist) {
      nn::Checkpoint ckpt;
      ckpt.seed = cfg.seed;
      ckpt.hyperparameters = to_json(cfg);
      ckpt.params = nn::snapshot(model.parameters());
      ckpt.metadata = {{"stage", s},
                       {"stage_name", name},
                       {"config_hash", hash},
                       {"report", to_json(report)}};
      fs::create_directories(opts.out_dir / "checkpoints");
      nn::save_checkpoint(stage_checkpoint_path(opts.out_dir, s), ckpt);
    }
    if (s == 2 && opts.capture_extractor != nullptr) {
      *opts.capture_extractor = StageSnapshot{2, nn::snapshot(model.parameters()), report};
    }
  }

  if (res.completed < kStageCount) return res;

  res.iid = evaluation::evaluate(model, data.iid, cfg.hp.mode);
  res.ood = evaluation::evaluate(model, data.ood, cfg.hp.mode);
  report.final_metrics = {{"iid", evaluation::to_json(*res.iid)},
                          {"ood", evaluation::to_json(*res.ood)}};
  if (persist) {
    write_text(opts.out_dir / "report.json", to_json(report).dump(2) + "\n");
    write_text(opts.out_dir / "metrics.json", report.final_metrics.dump(2) + "\n");
    write_curves_csv(opts.out_dir / "curves", report);
  }
  return res;
}

}  // namespace cure::pipeline
