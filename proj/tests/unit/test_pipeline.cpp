// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "cure/common/errors.hpp"
#include "cure/common/rng.hpp"
#include "cure/nn/adamw.hpp"
#include "cure/nn/grad_check.hpp"
#include "cure/pipeline/losses.hpp"
#include "cure/pipeline/run.hpp"
#include "cure/pipeline/stages.hpp"

using namespace cure;
using namespace cure::pipeline;

namespace {

const PreparedData& default_data() {
  static const PreparedData data = prepare_data(RunConfig{});
  return data;
}

ModelConfig model_config_for(const PreparedData& data) {
  ModelConfig mc;
  mc.n_concepts = data.split.concepts.size();
  mc.n_labels = static_cast<std::size_t>(data.split.n_labels);
  return mc;
}

nn::Tensord random_logits(Rng& rng, std::size_t n, std::size_t c, double spread) {
  std::vector<double> v(n * c);
  for (auto& x : v) x = rng.uniform(-spread, spread);
  return nn::Tensord::from({n, c}, std::move(v), true);
}

std::map<Part, std::uint64_t> hashes(const CureModel<float>& m) {
  std::map<Part, std::uint64_t> h;
  for (auto p : kAllParts) h[p] = m.part_hash(p);
  return h;
}

// Parts whose hash changed.
std::set<Part> changed(const std::map<Part, std::uint64_t>& before, const CureModel<float>& m) {
  std::set<Part> out;
  for (auto p : kAllParts) {
    if (m.part_hash(p) != before.at(p)) out.insert(p);
  }
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("concept dropout loss examples") {
  auto uniform = nn::Tensord::zeros({3, 6});
  CHECK(concept_dropout_loss(uniform, 1.0).item() == doctest::Approx(0.0).epsilon(1e-15));
  for (double tau : {0.5, 2.0, 3.0}) {
    CHECK(std::abs(concept_dropout_loss(uniform, tau).item() - (tau - 1.0) * std::log(6.0)) < 1e-12);
    CHECK(concept_dropout_floor(tau, 6) == doctest::Approx((tau - 1.0) * std::log(6.0)));
  }
  auto one_hot = nn::Tensord::from({1, 4}, {0.0, -1e4, -1e4, -1e4});
  CHECK(std::abs(concept_dropout_loss(one_hot, 1.0).item() - std::log(4.0)) < 1e-12);
}

TEST_CASE("concept dropout loss never drops below its floor") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.index(8);
    const double tau = rng.uniform(0.1, 3.0);
    auto logits = random_logits(rng, 1 + rng.index(6), c, rng.uniform(0.0, 5.0));
    CHECK(concept_dropout_loss(logits, tau).item() >= concept_dropout_floor(tau, c) - 1e-12);
  }
}

TEST_CASE("tau does not change the concept dropout gradient") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto logits = random_logits(rng, 4, 5, 3.0);
    std::vector<std::vector<double>> grads;
    for (double tau : {0.5, 1.0, 2.0}) {
      logits.zero_grad();
      concept_dropout_loss(logits, tau).backward();
      grads.emplace_back(logits.grad().begin(), logits.grad().end());
    }
    for (std::size_t i = 0; i < grads[0].size(); ++i) {
      CHECK(std::abs(grads[1][i] - grads[0][i]) < 1e-10);
      CHECK(std::abs(grads[2][i] - grads[0][i]) < 1e-10);
    }
  }
}

TEST_CASE("hinge examples") {
  CHECK(hinge_term(1.0, 0.0, Mode::kRemoval) == 0.0);
  CHECK(hinge_term(0.0, 0.2, Mode::kRemoval) == doctest::Approx(0.8));
  CHECK(hinge_term(0.0, 0.0, Mode::kEnhancement) == 0.0);
  CHECK_THROWS_AS(hinge_term(0.5, 0.0, Mode::kOff), ContractError);

  auto a = nn::Tensord::from({1, 2}, {1.0, 0.0});
  auto b = nn::Tensord::from({1, 2}, {0.0, 1.0});
  CHECK(margin_loss(a, b, 0.2, Mode::kRemoval).item() == doctest::Approx(0.8));
  CHECK_THROWS_AS(margin_loss(a, b, 0.0, Mode::kOff), ContractError);
  CHECK_THROWS_AS(margin_loss(a, b, 1.5, Mode::kRemoval), ConfigError);
}

TEST_CASE("hinge monotonicity") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const double c1 = rng.uniform(-1.0, 1.0), c2 = rng.uniform(-1.0, 1.0);
    const double m1 = rng.uniform(0.0, 1.0), m2 = rng.uniform(0.0, 1.0);
    const double clo = std::min(c1, c2), chi = std::max(c1, c2);
    const double mlo = std::min(m1, m2), mhi = std::max(m1, m2);
    CHECK(hinge_term(c1, mhi, Mode::kRemoval) <= hinge_term(c1, mlo, Mode::kRemoval));
    CHECK(hinge_term(c1, mhi, Mode::kEnhancement) <= hinge_term(c1, mlo, Mode::kEnhancement));
    CHECK(hinge_term(chi, m1, Mode::kRemoval) <= hinge_term(clo, m1, Mode::kRemoval));
    CHECK(hinge_term(chi, m1, Mode::kEnhancement) >= hinge_term(clo, m1, Mode::kEnhancement));
    CHECK(hinge_term(c1, m1, Mode::kRemoval) >= 0.0);
    CHECK(hinge_term(c1, m1, Mode::kEnhancement) >= 0.0);
  }
}

TEST_CASE("identity extractors reconstruct exactly") {
  ModelConfig mc;
  mc.dim = 16;
  CureModel<double> m(mc, 3);
  m.phi.make_identity();
  m.phi_hat.make_identity();
  Rng rng(1);
  std::vector<double> v(8 * 16);
  for (auto& x : v) x = rng.normal();
  auto x = nn::Tensord::from({8, 16}, v);
  CHECK(reconstruction_loss(m.phi_hat.forward(m.phi.forward(x)), x).item() == 0.0);
}

TEST_CASE("reconstruction gradient matches finite differences") {
  ModelConfig mc;
  mc.dim = 12;
  mc.residual_init = 1.0;
  CureModel<double> m(mc, 5);
  Rng rng(2);
  std::vector<double> v(4 * 12);
  for (auto& x : v) x = rng.normal();
  auto x = nn::Tensord::from({4, 12}, v);
  for (auto& p : m.parameters(Part::kPhiHat)) {
    CAPTURE(p.name);
    auto res = nn::grad_check(
        [&] { return reconstruction_loss(m.phi_hat.forward(m.phi.forward(x)), x); }, p.tensor);
    CHECK(res.max_rel_error < 1e-5);
  }
}

TEST_CASE("reversal network learns to invert a fixed extractor") {
  ModelConfig mc;
  mc.dim = 16;
  mc.residual_init = 1.0;
  CureModel<float> m(mc, 8);
  Rng rng(3);
  std::vector<float> v(256 * 16);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  auto x = nn::Tensorf::from({256, 16}, v);
  set_trainable_parts(m, {Part::kPhiHat});
  std::vector<nn::Tensorf> tensors;
  for (auto& p : m.parameters(Part::kPhiHat)) tensors.push_back(p.tensor);
  nn::AdamW<float> opt(tensors, nn::AdamWConfig{1e-3, 0.9, 0.999, 1e-8, 0.0});
  const auto phi_before = m.part_hash(Part::kPhi);
  const double first = train_reversal_step(m, x, opt);
  double last = first;
  for (int s = 1; s < 500; ++s) last = train_reversal_step(m, x, opt);
  CHECK(last < 0.25 * first);
  CHECK(m.part_hash(Part::kPhi) == phi_before);
}

TEST_CASE("concept head separates synthetic concepts and respects chance on noise") {
  const auto& data = default_data();
  StageSchedule sched;
  {
    CureModel<float> m(model_config_for(data), 11);
    TrainReport report;
    train_concept_head(m, data.train, sched, 1, report);
    CHECK(concept_accuracy(m, data.train, false) > 0.95);

    // Means over consecutive 10-step blocks never rise.
    const auto& c = report.curves.at("concept_head");
    REQUIRE(c.size() >= 20);
    std::vector<double> blocks;
    for (std::size_t i = 0; i + 10 <= c.size(); i += 10) {
      double m = 0.0;
      for (std::size_t j = i; j < i + 10; ++j) m += c[j] / 10.0;
      blocks.push_back(m);
    }
    std::size_t rises = 0;
    for (std::size_t i = 1; i < blocks.size(); ++i) rises += blocks[i] > blocks[i - 1];
    CAPTURE(rises);
    CHECK(rises == 0);
  }
  {
    auto shuffled = data.train;
    Rng rng(12);
    for (auto& c : shuffled.concepts) c = static_cast<int>(rng.index(data.split.concepts.size()));
    auto held_out = data.ood;
    held_out.concepts.resize(held_out.size());
    for (auto& c : held_out.concepts) c = static_cast<int>(rng.index(data.split.concepts.size()));
    CureModel<float> m(model_config_for(data), 11);
    TrainReport report;
    train_concept_head(m, shuffled, sched, 1, report);
    CHECK(std::abs(concept_accuracy(m, held_out, false) - 1.0 / 6.0) < 0.05);
  }
}

TEST_CASE("concept head needs two concepts") {
  auto train = default_data().train;
  std::fill(train.concepts.begin(), train.concepts.end(), 0);
  CureModel<float> m(model_config_for(default_data()), 1);
  TrainReport report;
  CHECK_THROWS_AS(train_concept_head(m, train, StageSchedule{}, 1, report), DegenerateTaskError);
}

TEST_CASE("each stage only changes its own parts") {
  const auto& data = default_data();
  CureModel<float> m(model_config_for(data), 21);
  StageSchedule sched;
  Hyperparameters hp;
  TrainReport report;

  auto before = hashes(m);
  train_concept_head(m, data.train, sched, 1, report);
  CHECK(changed(before, m) == std::set<Part>{Part::kOmega});

  before = hashes(m);
  train_content_extractor(m, data.train, sched, hp, 2, report);
  CHECK(changed(before, m) == std::set<Part>{Part::kPhi, Part::kPhiHat});

  // The extractor never makes concepts easier to recover.
  double pre = -1.0;
  for (const auto& e : report.epochs) {
    if (e.stage != "content_extractor") continue;
    if (e.epoch == 0) pre = e.values.at("concept_accuracy_phi");
    CHECK(e.values.at("concept_accuracy_phi") <= pre + 0.02);
  }
  CHECK(pre >= 0.0);

  before = hashes(m);
  train_debias(m, data.train, sched, hp, 3, report);
  for (auto p : changed(before, m)) CHECK(p == Part::kPsi);

  before = hashes(m);
  train_task_head(m, data.train, sched, hp, 4, report);
  CHECK(changed(before, m) == std::set<Part>{Part::kPsi, Part::kTheta});
}

TEST_CASE("reversal ablation never trains phi_hat") {
  const auto& data = default_data();
  CureModel<float> m(model_config_for(data), 21);
  StageSchedule sched;
  Hyperparameters hp;
  hp.use_reversal = false;
  TrainReport report;
  train_concept_head(m, data.train, sched, 1, report);
  auto before = hashes(m);
  train_content_extractor(m, data.train, sched, hp, 2, report);
  CHECK(changed(before, m) == std::set<Part>{Part::kPhi});
  CHECK(report.curves.count("reversal") == 0);
}

TEST_CASE("without content retention the reconstruction error is higher") {
  const auto& data = default_data();
  auto final_content = [&](double lambda) {
    CureModel<float> m(model_config_for(data), 21);
    StageSchedule sched;
    Hyperparameters hp;
    hp.lambda = lambda;
    TrainReport report;
    train_concept_head(m, data.train, sched, 1, report);
    train_content_extractor(m, data.train, sched, hp, 2, report);
    const auto& c = report.curves.at("content");
    double tail = 0.0;
    for (std::size_t i = c.size() - 50; i < c.size(); ++i) tail += c[i] / 50.0;
    return std::pair{tail, report.curves.at("concept_dropout").back()};
  };
  auto [with_content, concept_with] = final_content(1.0);
  auto [without_content, concept_without] = final_content(0.0);
  CHECK(without_content > with_content);
  CHECK(concept_without < 0.05);
}

TEST_CASE("debias stage reaches its hinge targets") {
  const auto& data = default_data();
  auto run_debias = [&](Mode mode, double margin) {
    auto m = std::make_unique<CureModel<float>>(model_config_for(data), 21);
    StageSchedule sched;
    sched.debias_epochs = 20;
    Hyperparameters hp;
    hp.mode = mode;
    hp.margin = margin;
    TrainReport report;
    train_concept_head(*m, data.train, sched, 1, report);
    train_content_extractor(*m, data.train, sched, hp, 2, report);
    const auto psi_before = m->part_hash(Part::kPsi);
    train_debias(*m, data.train, sched, hp, 3, report);
    return std::tuple{hinge_stats(*m, data.train, margin, mode), psi_before == m->part_hash(Part::kPsi),
                      std::move(m)};
  };
  {
    auto [stats, unchanged, m] = run_debias(Mode::kRemoval, 0.0);
    CHECK(stats.mean_cos >= 0.99);
  }
  {
    auto [stats, unchanged, m] = run_debias(Mode::kEnhancement, 0.0);
    CHECK(stats.mean_cos <= 0.05);
  }
  {
    auto [stats, unchanged, m] = run_debias(Mode::kRemoval, 1.0);
    CHECK(unchanged);
  }
  CureModel<float> m(model_config_for(data), 1);
  Hyperparameters off;
  off.mode = Mode::kOff;
  TrainReport report;
  CHECK_THROWS_AS(train_debias(m, data.train, StageSchedule{}, off, 1, report), ContractError);
}

TEST_CASE("non-finite input aborts with a divergence error") {
  auto train = default_data().train;
  std::vector<float> v(train.x.values().begin(), train.x.values().end());
  v[0] = std::numeric_limits<float>::quiet_NaN();
  train.x = nn::Tensorf::from(train.x.shape(), v);
  CureModel<float> m(model_config_for(default_data()), 1);
  TrainReport report;
  try {
    train_concept_head(m, train, StageSchedule{}, 1, report);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("concept_head") != std::string::npos);
  }
}

TEST_CASE("runs are deterministic and resume equals an uninterrupted run") {
  RunConfig cfg;
  const auto data = prepare_data(cfg);
  const auto a = run_cure(cfg, data);
  const auto b = run_cure(cfg, data);
  CHECK(model_hash(*a.model) == model_hash(*b.model));
  CHECK(evaluation::to_json(*a.iid).dump() == evaluation::to_json(*b.iid).dump());
  CHECK(evaluation::to_json(*a.ood).dump() == evaluation::to_json(*b.ood).dump());

  const auto dir = fresh_dir("cure_resume_test");
  RunOptions stop;
  stop.out_dir = dir;
  stop.stop_after = 2;
  auto partial = run_cure(cfg, data, stop);
  CHECK(partial.completed == 2);
  CHECK_FALSE(partial.ood.has_value());
  CHECK(std::filesystem::exists(stage_checkpoint_path(dir, 2)));

  RunOptions resume;
  resume.out_dir = dir;
  resume.resume = true;
  auto resumed = run_cure(cfg, data, resume);
  CHECK(resumed.resumed_from == 2);
  CHECK(model_hash(*resumed.model) == model_hash(*a.model));
  CHECK(evaluation::to_json(*resumed.ood).dump() == evaluation::to_json(*a.ood).dump());

  // A checkpoint from a different config is never resumed from.
  auto other = cfg;
  other.hp.margin = 0.5;
  auto fresh = run_cure(other, data, resume);
  CHECK(fresh.resumed_from == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mode off skips the CURE stages") {
  RunConfig cfg;
  cfg.hp.mode = Mode::kOff;
  const auto& data = default_data();
  CureModel<float> init(model_config_for(data), substream_seed(cfg.seed, "model"));
  auto res = run_cure(cfg, data);
  for (const char* s : {"concept_head", "content_extractor", "debias"}) {
    CHECK(res.report.stages.at(s) == StageStatus::kSkipped);
  }
  CHECK(res.report.stages.at("task_head") == StageStatus::kCompleted);
  for (auto p : {Part::kOmega, Part::kPhi, Part::kPhiHat, Part::kPsi}) {
    CHECK(res.model->part_hash(p) == init.part_hash(p));
  }
  CHECK(to_json(res.report)["stages"]["debias"] == "absent");
}

TEST_CASE("run writes report, metrics and curves") {
  const auto dir = fresh_dir("cure_run_out");
  RunOptions opts;
  opts.out_dir = dir;
  RunConfig cfg;
  run_cure(cfg, default_data(), opts);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "metrics.json"));
  CHECK(std::filesystem::exists(dir / "curves" / "task.csv"));
  const auto csv = read_file(dir / "curves" / "task.csv");
  CHECK(csv.rfind("step,loss\n", 0) == 0);
  for (int s = 1; s <= kStageCount; ++s) CHECK(std::filesystem::exists(stage_checkpoint_path(dir, s)));
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation and JSON round-trip") {
  RunConfig cfg;
  cfg.hp.margin = 0.3;
  cfg.hp.mode = Mode::kEnhancement;
  cfg.schedule.batch_size = 8;
  const auto back = run_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(config_hash(back) == config_hash(cfg));
  auto other = cfg;
  other.hp.margin = 0.4;
  CHECK(config_hash(other) != config_hash(cfg));

  auto bad = cfg;
  bad.schedule.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.hp.margin = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(mode_from_string("sideways"), ConfigError);
}

TEST_CASE("parameter counts at width 768") {
  const auto c = parameter_counts(768);
  CHECK(c.extractor == 1779968);
  CHECK(c.debias == 1181696);
  auto j = parameter_count_report(64);
  CHECK(j.contains("note"));
}

}  // TEST_SUITE
