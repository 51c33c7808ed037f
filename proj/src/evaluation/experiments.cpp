// SPDX-License-Identifier: Apache-2.0
#include "cure/evaluation/experiments.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "cure/common/errors.hpp"
#include "cure/common/hash.hpp"

namespace cure::evaluation {

using pipeline::Mode;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<double> default_margin_grid() {
  std::vector<double> g;
  for (int i = 0; i < 10; ++i) g.push_back(i / 10.0);
  return g;
}

namespace {

// Runs job(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void run_jobs(std::size_t n, int workers, Fn job) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string cell_dir_name(Mode mode, double margin, std::uint64_t seed) {
  return std::string(pipeline::to_string(mode)) + "_m" + format_double(margin) + "_s" +
         std::to_string(seed);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

nlohmann::json nan_to_null(double v) {
  return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

}  // namespace

SweepResult margin_sweep(const pipeline::RunConfig& base, const std::vector<Mode>& modes,
                         const std::vector<double>& grid, const std::vector<std::uint64_t>& seeds,
                         const ExperimentOptions& opts) {
  for (double m : grid) {
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("sweep.margins must lie in [0, 1]");
  }
  for (Mode mode : modes) {
    if (mode == Mode::kOff) throw ConfigError("sweep.modes cannot include off");
  }
  if (modes.empty() || grid.empty() || seeds.empty()) {
    throw ConfigError("sweep needs at least one mode, margin and seed");
  }
  base.validate();

  SweepResult res{modes, grid, seeds, {}};
  const std::size_t n_seeds = seeds.size();
  res.cells.resize(modes.size() * grid.size() * n_seeds);
  auto index = [&](std::size_t mi, std::size_t gi, std::size_t si) {
    return (mi * grid.size() + gi) * n_seeds + si;
  };
  for (std::size_t mi = 0; mi < modes.size(); ++mi) {
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      for (std::size_t si = 0; si < n_seeds; ++si) {
        res.cells[index(mi, gi, si)] = SweepCell{modes[mi], grid[gi], seeds[si], {}, {}, {}};
      }
    }
  }

  run_jobs(n_seeds, opts.workers, [&](std::size_t si) {
    pipeline::RunConfig cfg = base;
    cfg.seed = seeds[si];
    cfg.hp.mode = modes[0];
    cfg.hp.margin = grid[0];
    pipeline::PreparedData data;
    pipeline::StageSnapshot shared;
    std::string seed_error;
    try {
      data = pipeline::prepare_data(cfg);
      pipeline::RunOptions ro;
      ro.stop_after = 2;
      ro.capture_extractor = &shared;
      pipeline::run_cure(cfg, data, ro);
    } catch (const std::exception& e) {
      seed_error = e.what();
    }
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        SweepCell& cell = res.cells[index(mi, gi, si)];
        if (!seed_error.empty()) {
          cell.error = seed_error;
          continue;
        }
        pipeline::RunConfig c = cfg;
        c.hp.mode = modes[mi];
        c.hp.margin = grid[gi];
        pipeline::RunOptions ro;
        ro.start = &shared;
        if (!opts.out_dir.empty()) {
          ro.out_dir = opts.out_dir / cell_dir_name(c.hp.mode, c.hp.margin, c.seed);
        }
        try {
          auto r = pipeline::run_cure(c, data, ro);
          cell.iid = r.iid;
          cell.ood = r.ood;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      }
    }
  });
  return res;
}

double mean_accuracy(const SweepResult& r, Mode mode, double margin, const std::string& split) {
  std::vector<double> v;
  for (const auto& c : r.cells) {
    if (c.mode != mode || c.margin != margin || !c.error.empty()) continue;
    const auto& m = split == "iid" ? c.iid : c.ood;
    if (m) v.push_back(m->accuracy);
  }
  return mean_of(v);
}

std::string sweep_cells_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "mode,margin,seed,iid_accuracy,iid_macro_f1,ood_accuracy,ood_macro_f1,error\n";
  for (const auto& c : r.cells) {
    os << pipeline::to_string(c.mode) << ',' << format_double(c.margin) << ',' << c.seed << ',';
    if (c.iid && c.ood) {
      os << format_double(c.iid->accuracy) << ',' << format_double(c.iid->macro_f1) << ','
         << format_double(c.ood->accuracy) << ',' << format_double(c.ood->macro_f1) << ',';
    } else {
      os << ",,,,";
    }
    std::string err = c.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    os << err << '\n';
  }
  return os.str();
}

std::string sweep_long_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "mode,M,seed,split,metric,value\n";
  for (const auto& c : r.cells) {
    for (const char* split : {"iid", "ood"}) {
      const auto& m = std::string(split) == "iid" ? c.iid : c.ood;
      if (!m) continue;
      for (auto [name, value] : {std::pair<const char*, double>{"accuracy", m->accuracy},
                                 std::pair<const char*, double>{"macro_f1", m->macro_f1}}) {
        os << pipeline::to_string(c.mode) << ',' << format_double(c.margin) << ',' << c.seed << ','
           << split << ',' << name << ',' << format_double(value) << '\n';
      }
    }
  }
  return os.str();
}

nlohmann::json sweep_summary(const SweepResult& r) {
  nlohmann::json modes = nlohmann::json::object();
  std::size_t failed = 0;
  for (const auto& c : r.cells) failed += c.error.empty() ? 0 : 1;
  for (Mode mode : r.modes) {
    nlohmann::json rows = nlohmann::json::array();
    for (double m : r.grid) {
      std::vector<double> ia, io, fi, fo;
      for (const auto& c : r.cells) {
        if (c.mode != mode || c.margin != m || !c.iid || !c.ood) continue;
        ia.push_back(c.iid->accuracy);
        io.push_back(c.ood->accuracy);
        fi.push_back(c.iid->macro_f1);
        fo.push_back(c.ood->macro_f1);
      }
      rows.push_back({{"M", m},
                      {"n", ia.size()},
                      {"iid_accuracy", nan_to_null(mean_of(ia))},
                      {"ood_accuracy", nan_to_null(mean_of(io))},
                      {"iid_macro_f1", nan_to_null(mean_of(fi))},
                      {"ood_macro_f1", nan_to_null(mean_of(fo))}});
    }
    modes[pipeline::to_string(mode)] = rows;
  }
  return {{"seeds", r.seeds}, {"grid", r.grid}, {"cells", r.cells.size()},
          {"failed_cells", failed}, {"seed_averaged", modes}};
}

AblationResult ablation_reversal(const pipeline::RunConfig& base,
                                 const std::vector<std::uint64_t>& seeds,
                                 const ExperimentOptions& opts) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (base.hp.mode == Mode::kOff) throw ConfigError("ablation needs mode removal or enhancement");
  base.validate();
  AblationResult res{seeds, std::vector<AblationRow>(seeds.size() * 2)};
  run_jobs(seeds.size(), opts.workers, [&](std::size_t si) {
    pipeline::RunConfig cfg = base;
    cfg.seed = seeds[si];
    pipeline::PreparedData data;
    std::string seed_error;
    try {
      data = pipeline::prepare_data(cfg);
    } catch (const std::exception& e) {
      seed_error = e.what();
    }
    for (int v = 0; v < 2; ++v) {
      AblationRow& row = res.rows[si * 2 + static_cast<std::size_t>(v)];
      row.seed = seeds[si];
      row.with_reversal = v == 0;
      if (!seed_error.empty()) {
        row.error = seed_error;
        continue;
      }
      pipeline::RunConfig c = cfg;
      c.hp.use_reversal = row.with_reversal;
      pipeline::RunOptions ro;
      if (!opts.out_dir.empty()) {
        ro.out_dir = opts.out_dir / ((row.with_reversal ? "with_s" : "without_s") +
                                     std::to_string(c.seed));
      }
      try {
        auto r = pipeline::run_cure(c, data, ro);
        row.iid = r.iid;
        row.ood = r.ood;
        row.output_variance = pipeline::output_variance(*r.model, data.train);
        const auto& curves = r.report.curves;
        if (auto it = curves.find("concept_dropout"); it != curves.end() && !it->second.empty()) {
          row.final_concept_loss = it->second.back();
        }
        if (auto it = curves.find("content"); it != curves.end() && !it->second.empty()) {
          row.final_content_loss = it->second.back();
        }
        row.report = std::move(r.report);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  });
  return res;
}

std::string ablation_csv(const AblationResult& r) {
  std::ostringstream os;
  os << "seed,variant,iid_accuracy,iid_macro_f1,ood_accuracy,ood_macro_f1,output_variance,"
        "final_concept_loss,final_content_loss,error\n";
  for (const auto& row : r.rows) {
    os << row.seed << ',' << (row.with_reversal ? "with_reversal" : "without_reversal") << ',';
    if (row.iid && row.ood) {
      os << format_double(row.iid->accuracy) << ',' << format_double(row.iid->macro_f1) << ','
         << format_double(row.ood->accuracy) << ',' << format_double(row.ood->macro_f1) << ','
         << format_double(row.output_variance) << ',' << format_double(row.final_concept_loss)
         << ',' << format_double(row.final_content_loss) << ',';
    } else {
      os << ",,,,,,,";
    }
    std::string err = row.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    os << err << '\n';
  }
  return os.str();
}

nlohmann::json ablation_summary(const AblationResult& r) {
  std::vector<double> d_ood, d_iid, var_with, var_without, ood_with, ood_without;
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t i = 0; i + 1 < r.rows.size(); i += 2) {
    const auto& w = r.rows[i];
    const auto& wo = r.rows[i + 1];
    if (!w.ood || !wo.ood) continue;
    d_ood.push_back(w.ood->accuracy - wo.ood->accuracy);
    d_iid.push_back(w.iid->accuracy - wo.iid->accuracy);
    ood_with.push_back(w.ood->accuracy);
    ood_without.push_back(wo.ood->accuracy);
    var_with.push_back(w.output_variance);
    var_without.push_back(wo.output_variance);
    pairs.push_back({{"seed", w.seed},
                     {"delta_ood_accuracy", d_ood.back()},
                     {"delta_iid_accuracy", d_iid.back()},
                     {"output_variance_with", w.output_variance},
                     {"output_variance_without", wo.output_variance}});
  }
  return {{"seeds", r.seeds},
          {"pairs", pairs},
          {"mean_ood_accuracy_with", nan_to_null(mean_of(ood_with))},
          {"mean_ood_accuracy_without", nan_to_null(mean_of(ood_without))},
          {"mean_delta_ood_accuracy", nan_to_null(mean_of(d_ood))},
          {"mean_delta_iid_accuracy", nan_to_null(mean_of(d_iid))},
          {"mean_output_variance_with", nan_to_null(mean_of(var_with))},
          {"mean_output_variance_without", nan_to_null(mean_of(var_without))}};
}

}  // namespace cure::evaluation
