// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   cure_acceptance [--only 3,5] [--set section.key=value ...]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cure/cli/config.hpp"
#include "cure/common/rng.hpp"
#include "cure/corpus/concept_stats.hpp"
#include "cure/diagnostics/grad_cases.hpp"
#include "cure/evaluation/evaluate.hpp"
#include "cure/evaluation/experiments.hpp"
#include "cure/nn/ops.hpp"
#include "cure/pipeline/losses.hpp"
#include "cure/pipeline/run.hpp"
#include "oracles.hpp"

namespace {

using namespace cure;
using pipeline::Mode;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

// Results of full runs shared between criteria, computed on first use.
struct Runs {
  cli::CliConfig cfg;
  std::vector<double> base_iid, base_ood;
  std::vector<double> base_seconds;

  void ensure_baseline() {
    if (!base_iid.empty()) return;
    for (auto seed : kSeeds) {
      auto t0 = std::chrono::steady_clock::now();
      auto c = cfg.run;
      c.seed = seed;
      c.hp.mode = Mode::kOff;
      auto data = pipeline::prepare_data(c);
      auto r = pipeline::run_cure(c, data);
      base_iid.push_back(r.iid->accuracy);
      base_ood.push_back(r.ood->accuracy);
      base_seconds.push_back(seconds_since(t0));
    }
  }

  // (iid, ood) accuracy per seed for one mode / margin.
  std::pair<std::vector<double>, std::vector<double>> run_mode(Mode mode, double margin) {
    std::vector<double> iid, ood;
    for (auto seed : kSeeds) {
      auto c = cfg.run;
      c.seed = seed;
      c.hp.mode = mode;
      c.hp.margin = margin;
      auto data = pipeline::prepare_data(c);
      auto r = pipeline::run_cure(c, data);
      iid.push_back(r.iid->accuracy);
      ood.push_back(r.ood->accuracy);
    }
    return {iid, ood};
  }
};

// 1 -------------------------------------------------------------------------
Outcome gradient_correctness(Runs&) {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  for (const auto& c : diagnostics::all_grad_cases()) {
    ++cases;
    for (std::uint64_t s = 1; s <= 20; ++s) {
      const double e = c.run(s);
      if (!(e <= worst)) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 30.0,
          std::to_string(cases) + " ops/layers x 20 seeds, max rel err " + fmt("%.3g", worst) +
              " (" + worst_name + "), " + fmt("%.1f", secs) + " s"};
}

// 2 -------------------------------------------------------------------------
Outcome mi_oracle(Runs&) {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024, "acceptance.mi");
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t rows = 2 + rng.index(6), cols = 2 + rng.index(3);
    std::vector<std::vector<std::size_t>> joint(rows, std::vector<std::size_t>(cols));
    for (auto& r : joint) {
      for (auto& v : r) v = rng.bernoulli(0.15) ? 0 : rng.index(200);
    }
    joint[0][0] += 1;
    const auto got = corpus::concept_mi_from_counts(joint);
    const auto want = testing::mi_oracle(joint);
    for (std::size_t i = 0; i < rows; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  // One concept covering half the corpus, all positive; P(y=+) = 0.5.
  const auto closed = corpus::concept_mi_from_counts({{50, 0}, {0, 50}});
  const double closed_err = std::abs(closed[0] - 0.5 * std::log(2.0));
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && closed_err <= 1e-12 && secs < 5.0,
          "100 tables max |diff| " + fmt("%.2g", worst) + ", closed form |diff| " +
              fmt("%.2g", closed_err) + ", " + fmt("%.2f", secs) + " s"};
}

// 3 -------------------------------------------------------------------------
Outcome concept_dropout_floor(Runs& runs) {
  auto t0 = std::chrono::steady_clock::now();
  auto c = runs.cfg.run;
  c.seed = 1;
  auto data = pipeline::prepare_data(c);
  pipeline::RunOptions ro;
  ro.stop_after = 2;
  auto r = pipeline::run_cure(c, data, ro);
  const std::size_t n_concepts = data.split.concepts.size();
  const double floor = pipeline::concept_dropout_floor(c.hp.tau, n_concepts);
  const double loss = pipeline::mean_concept_dropout(*r.model, data.train, c.hp.tau);
  const double last_step = r.report.curves.at("concept_dropout").back();
  const double acc = pipeline::concept_accuracy(*r.model, data.train, true);
  const double chance = 1.0 / static_cast<double>(n_concepts);
  const double secs = seconds_since(t0);
  const bool pass = std::abs(loss - floor) <= 0.05 && std::abs(acc - chance) <= 0.05 && secs < 180;
  return {pass, "L_concept " + fmt("%.4f", loss) + " (last step " + fmt("%.4f", last_step) +
                    ") vs floor " + fmt("%.4f", floor) + "; head accuracy on phi(x) " +
                    fmt("%.3f", acc) + " vs chance " + fmt("%.3f", chance) + "; " +
                    fmt("%.1f", secs) + " s"};
}

// 4 -------------------------------------------------------------------------
Outcome tau_invariance(Runs& runs) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    pipeline::ModelConfig mc;
    mc.dim = 16;
    mc.n_concepts = 6;
    pipeline::CureModel<double> model(mc, seed);
    Rng rng(seed, "acceptance.tau");
    std::vector<double> xv(16 * 16);
    for (auto& v : xv) v = rng.normal();
    auto x = nn::Tensord::from({16, 16}, xv);
    std::vector<std::vector<double>> grads;
    for (double tau : {0.5, 1.0, 2.0}) {
      model.phi.zero_grad();
      auto loss = pipeline::concept_dropout_loss(model.omega.forward(model.phi.forward(x)), tau);
      loss.backward();
      std::vector<double> g;
      for (auto& p : model.parameters(pipeline::Part::kPhi)) {
        auto pg = p.tensor.grad();
        g.insert(g.end(), pg.begin(), pg.end());
      }
      grads.push_back(std::move(g));
    }
    for (std::size_t k = 1; k < grads.size(); ++k) {
      for (std::size_t i = 0; i < grads[0].size(); ++i) {
        worst = std::max(worst, std::abs(grads[k][i] - grads[0][i]));
      }
    }
  }
  (void)runs;
  return {worst <= 1e-10, "max |dL/dphi(tau) - dL/dphi(0.5)| over tau in {1, 2}, 3 batches: " +
                              fmt("%.2g", worst)};
}

// 5 -------------------------------------------------------------------------
Outcome shortcut_replication(Runs& runs) {
  runs.ensure_baseline();
  const double gap = mean(runs.base_iid) - mean(runs.base_ood);
  const double secs = [&] {
    double s = 0;
    for (double v : runs.base_seconds) s += v;
    return s;
  }();
  return {gap >= 0.10 && secs < 120,
          "baseline iid " + fmt("%.4f", mean(runs.base_iid)) + ", ood " +
              fmt("%.4f", mean(runs.base_ood)) + ", gap " + fmt("%.4f", gap) + "; " +
              fmt("%.1f", secs) + " s"};
}

// 6 -------------------------------------------------------------------------
Outcome debiasing_effect(Runs& runs) {
  runs.ensure_baseline();
  auto t0 = std::chrono::steady_clock::now();
  auto [iid, ood] = runs.run_mode(Mode::kRemoval, 0.0);
  const double secs = seconds_since(t0);
  const double gap = mean(runs.base_iid) - mean(runs.base_ood);
  const double recovered = gap > 0 ? (mean(ood) - mean(runs.base_ood)) / gap : std::nan("");
  int wins = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    wins += ood[i] > runs.base_ood[i] ? 1 : 0;
    per_seed += (i ? " " : "") + fmt("%+.3f", ood[i] - runs.base_ood[i]);
  }
  return {recovered >= 0.5 && wins >= 4 && secs < 300,
          "removal ood " + fmt("%.4f", mean(ood)) + " vs baseline " +
              fmt("%.4f", mean(runs.base_ood)) + ", recovered " + fmt("%.2f", recovered) +
              " of gap, wins " + std::to_string(wins) + "/5 [" + per_seed + "]; " +
              fmt("%.1f", secs) + " s"};
}

// 7 -------------------------------------------------------------------------
Outcome enhancement_effect(Runs& runs) {
  runs.ensure_baseline();
  auto [iid, ood] = runs.run_mode(Mode::kEnhancement, 0.0);
  const double diff = mean(iid) - mean(runs.base_iid);
  return {diff >= -0.005, "enhancement iid " + fmt("%.4f", mean(iid)) + " vs baseline " +
                              fmt("%.4f", mean(runs.base_iid)) + " (diff " + fmt("%+.4f", diff) +
                              ")"};
}

// 8 -------------------------------------------------------------------------
Outcome margin_control(Runs& runs) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = evaluation::margin_sweep(runs.cfg.run, {Mode::kRemoval, Mode::kEnhancement},
                                    evaluation::default_margin_grid(), kSeeds);
  const double secs = seconds_since(t0);
  std::size_t failed = 0;
  for (const auto& c : r.cells) failed += c.error.empty() ? 0 : 1;
  const double rem0 = evaluation::mean_accuracy(r, Mode::kRemoval, 0.0, "ood");
  const double rem9 = evaluation::mean_accuracy(r, Mode::kRemoval, 0.9, "ood");
  const double enh0 = evaluation::mean_accuracy(r, Mode::kEnhancement, 0.0, "iid");
  const double enh9 = evaluation::mean_accuracy(r, Mode::kEnhancement, 0.9, "iid");
  return {failed == 0 && rem0 >= rem9 && enh0 >= enh9 && secs < 1500,
          "removal ood M=0 " + fmt("%.4f", rem0) + " vs M=0.9 " + fmt("%.4f", rem9) +
              "; enhancement iid M=0 " + fmt("%.4f", enh0) + " vs M=0.9 " + fmt("%.4f", enh9) +
              "; " + std::to_string(r.cells.size()) + " cells, " + std::to_string(failed) +
              " failed, " + fmt("%.1f", secs) + " s"};
}

// 9 -------------------------------------------------------------------------
Outcome reversal_ablation(Runs& runs) {
  auto cfg = runs.cfg.run;
  cfg.hp.mode = Mode::kRemoval;
  auto r = evaluation::ablation_reversal(cfg, kSeeds);
  auto s = evaluation::ablation_summary(r);
  for (const auto& row : r.rows) {
    if (!row.error.empty()) return {false, "ablation cell failed: " + row.error};
  }
  const double with = s["mean_ood_accuracy_with"], without = s["mean_ood_accuracy_without"];
  const double vw = s["mean_output_variance_with"], vwo = s["mean_output_variance_without"];
  return {with >= without && vwo < vw,
          "ood with reversal " + fmt("%.4f", with) + " vs without " + fmt("%.4f", without) +
              "; output variance with " + fmt("%.4g", vw) + " vs without " + fmt("%.4g", vwo)};
}

// 10 ------------------------------------------------------------------------
Outcome hinge_properties(Runs&) {
  // Pairs with exactly representable cosines against a = e1.
  const std::vector<std::pair<double, std::vector<double>>> pairs = {
      {-1.0, {-1, 0, 0, 0}}, {-0.5, {-1, 1, 1, 1}}, {0.0, {0, 1, 0, 0}},
      {0.5, {1, 1, 1, 1}},   {1.0, {3, 0, 0, 0}}};
  const auto a = nn::Tensord::from({1, 4}, {1, 0, 0, 0});
  int checked = 0, mismatches = 0;
  for (const auto& [cos, bv] : pairs) {
    const auto b = nn::Tensord::from({1, 4}, bv);
    for (double m : {0.0, 0.25, 0.5, 1.0}) {
      const double removal = std::max(0.0, 1.0 - cos - m);
      const double enhancement = std::max(0.0, cos - m);
      checked += 2;
      if (pipeline::hinge_term(cos, m, Mode::kRemoval) != removal) ++mismatches;
      if (pipeline::hinge_term(cos, m, Mode::kEnhancement) != enhancement) ++mismatches;
      if (pipeline::margin_loss(a, b, m, Mode::kRemoval).item() != removal) ++mismatches;
      if (pipeline::margin_loss(a, b, m, Mode::kEnhancement).item() != enhancement) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(checked) + " (cos, M, mode) cells via hinge_term and " +
                               "margin_loss, " + std::to_string(mismatches) + " mismatches"};
}

// 11 ------------------------------------------------------------------------
Outcome determinism_resume(Runs& runs) {
  auto c = runs.cfg.run;
  c.seed = 7;
  auto data = pipeline::prepare_data(c);
  auto a = pipeline::run_cure(c, data);
  auto data2 = pipeline::prepare_data(c);
  auto b = pipeline::run_cure(c, data2);
  const bool same = a.report.final_metrics.dump() == b.report.final_metrics.dump() &&
                    pipeline::model_hash(*a.model) == pipeline::model_hash(*b.model);

  const fs::path dir = fs::temp_directory_path() / ("cure_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  pipeline::RunOptions first;
  first.out_dir = dir;
  first.stop_after = 2;
  pipeline::run_cure(c, data, first);
  pipeline::RunOptions second;
  second.out_dir = dir;
  second.resume = true;
  auto resumed = pipeline::run_cure(c, data, second);
  fs::remove_all(dir);
  const bool resume_same = resumed.resumed_from == 2 &&
                           resumed.report.final_metrics.dump() == a.report.final_metrics.dump() &&
                           pipeline::model_hash(*resumed.model) == pipeline::model_hash(*a.model);
  return {same && resume_same,
          std::string("repeat run ") + (same ? "bit-identical" : "DIFFERS") +
              "; resume after stage 2 " + (resume_same ? "bit-identical" : "DIFFERS")};
}

// 12 ------------------------------------------------------------------------
Outcome overhead_sanity(Runs& runs) {
  auto c = runs.cfg.run;
  c.seed = 1;
  c.hp.mode = Mode::kOff;
  auto data = pipeline::prepare_data(c);
  auto r = pipeline::run_cure(c, data);
  const auto& pc = r.report.parameter_counts;
  const auto& w = pc.at("width_768");
  const double er = w.at("extractor_ratio"), dr = w.at("debias_ratio");
  const bool noted = pc.contains("note") && !pc.at("note").get<std::string>().empty();
  auto within = [](double ratio) { return ratio >= 0.5 && ratio <= 2.0; };
  return {within(er) && within(dr) && noted,
          "width 768: extractor " + std::to_string(w.at("extractor").get<std::size_t>()) +
              " (x" + fmt("%.3f", er) + " of 1.78M), debias " +
              std::to_string(w.at("debias").get<std::size_t>()) + " (x" + fmt("%.3f", dr) +
              " of 1.18M); ambiguity note " + (noted ? "present" : "MISSING")};
}

}  // namespace

int main(int argc, char** argv) {
  Runs runs;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--set" && i + 1 < argc) {
      cli::apply_override(runs.cfg, argv[++i]);
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--only 1,2] [--set section.key=value]...\n", argv[0]);
      return 2;
    }
  }
  runs.cfg.validate();

  const std::vector<std::pair<const char*, std::function<Outcome(Runs&)>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"MI oracle equivalence", mi_oracle},
      {"concept-dropout floor", concept_dropout_floor},
      {"tau-gradient invariance", tau_invariance},
      {"shortcut replication", shortcut_replication},
      {"debiasing effect", debiasing_effect},
      {"enhancement effect", enhancement_effect},
      {"margin control", margin_control},
      {"reversal ablation", reversal_ablation},
      {"margin-loss hinge properties", hinge_properties},
      {"determinism and resume", determinism_resume},
      {"overhead sanity", overhead_sanity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second(runs);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] criterion %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
