// SPDX-License-Identifier: Apache-2.0
#include "cure/pipeline/stages.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cure/common/errors.hpp"
#include "cure/nn/ops.hpp"
#include "cure/pipeline/losses.hpp"

namespace cure::pipeline {

namespace {

template <typename T>
std::vector<nn::Tensor<T>> tensors_of(const CureModel<T>& model, std::initializer_list<Part> parts) {
  std::vector<nn::Tensor<T>> out;
  for (Part p : parts) {
    for (auto& np : model.parameters(p)) out.push_back(np.tensor);
  }
  return out;
}

nn::AdamWConfig adamw_config(double lr, const StageSchedule& sched) {
  nn::AdamWConfig cfg;
  cfg.lr = lr;
  cfg.weight_decay = sched.weight_decay;
  return cfg;
}

void check_loss(const char* stage, std::size_t step, double value) {
  if (std::isfinite(value) && std::abs(value) <= kDivergenceThreshold) return;
  std::ostringstream os;
  os << "stage " << stage << " diverged at step " << step << ": loss = " << value;
  throw DivergenceError(os.str());
}

/// Hashes every part outside `trainable` and verifies they are untouched.
template <typename T>
class FrozenGuard {
 public:
  FrozenGuard(const CureModel<T>& model, std::initializer_list<Part> trainable, const char* stage)
      : model_(model), stage_(stage) {
    for (Part p : kAllParts) {
      if (std::find(trainable.begin(), trainable.end(), p) == trainable.end()) {
        hashes_.push_back({p, model.part_hash(p)});
      }
    }
  }
  void verify() const {
    for (const auto& [p, h] : hashes_) {
      if (model_.part_hash(p) != h) {
        throw ContractError(std::string("stage ") + stage_ + " modified frozen part " + to_string(p));
      }
    }
  }

 private:
  const CureModel<T>& model_;
  const char* stage_;
  std::vector<std::pair<Part, std::uint64_t>> hashes_;
};

Rng stage_rng(std::uint64_t seed, const char* stage, int epoch) {
  return Rng(seed, std::string("batches.") + stage + "." + std::to_string(epoch));
}

template <typename T>
nn::Tensor<T> phi_of(const CureModel<T>& model, const nn::Tensor<T>& x) {
  nn::NoGradGuard guard;
  return model.phi.forward(x);
}

}  // namespace

template <typename T>
nn::Tensor<T> gather_rows(const nn::Tensor<T>& x, const std::vector<std::size_t>& idx) {
  const std::size_t d = x.cols();
  std::vector<T> v(idx.size() * d);
  auto src = x.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * d), d,
                v.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return nn::Tensor<T>::from({idx.size(), d}, std::move(v));
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const nn::Tensor<T>& logits) {
  const std::size_t k = logits.cols();
  const std::size_t n = logits.numel() / k;
  auto v = logits.values();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = v.subspan(i * k, k);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

template <typename T>
double concept_accuracy(const CureModel<T>& model, const Dataset<T>& data, bool through_phi) {
  if (data.concepts.size() != data.size() || data.size() == 0) {
    throw LabelingIncompleteError("concept accuracy needs concept labels for every row");
  }
  nn::NoGradGuard guard;
  auto in = through_phi ? model.phi.forward(data.x) : data.x;
  const auto pred = argmax_rows(model.omega.forward(in));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.concepts[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

template <typename T>
double mean_concept_dropout(const CureModel<T>& model, const Dataset<T>& data, double tau) {
  nn::NoGradGuard guard;
  return static_cast<double>(
      concept_dropout_loss(model.omega.forward(model.phi.forward(data.x)), tau).item());
}

template <typename T>
double output_variance(const CureModel<T>& model, const Dataset<T>& data) {
  nn::NoGradGuard guard;
  auto y = model.phi.forward(data.x);
  const std::size_t d = y.cols();
  const std::size_t n = y.rows();
  auto v = y.values();
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += v[i * d + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (v[i * d + j] - mean) * (v[i * d + j] - mean);
    total += var / static_cast<double>(n);
  }
  return total / static_cast<double>(d);
}

template <typename T>
HingeStats hinge_stats(const CureModel<T>& model, const Dataset<T>& data, double margin, Mode mode) {
  nn::NoGradGuard guard;
  auto a = model.psi.forward(data.x);
  auto b = model.psi.forward(model.phi.forward(data.x));
  auto cos = nn::cosine_rows(a, b);
  HingeStats s;
  std::size_t ok = 0;
  for (T c : cos.values()) {
    s.mean_cos += static_cast<double>(c);
    // Same arithmetic as margin_loss so "satisfied" means a zero loss term.
    const T term = mode == Mode::kRemoval ? static_cast<T>(-c + static_cast<T>(1.0 - margin))
                                          : static_cast<T>(c + static_cast<T>(-margin));
    ok += term <= T(0) ? 1 : 0;
  }
  s.satisfied = static_cast<double>(ok) / static_cast<double>(cos.numel());
  s.mean_cos /= static_cast<double>(cos.numel());
  return s;
}

template <typename T>
void set_trainable_parts(CureModel<T>& model, std::initializer_list<Part> trainable) {
  for (Part p : kAllParts) model.part(p).set_trainable(false);
  for (Part p : trainable) model.part(p).set_trainable(true);
}

template <typename T>
void train_concept_head(CureModel<T>& model, const Dataset<T>& train, const StageSchedule& sched,
                        std::uint64_t seed, TrainReport& report) {
  constexpr const char* kStage = "concept_head";
  if (train.concepts.size() != train.size()) {
    throw LabelingIncompleteError("concept head training needs a concept for every train row");
  }
  if (std::set<int>(train.concepts.begin(), train.concepts.end()).size() < 2) {
    throw DegenerateTaskError("concept head: fewer than two distinct concepts in train");
  }
  set_trainable_parts(model, {Part::kOmega});
  FrozenGuard<T> guard(model, {Part::kOmega}, kStage);
  nn::AdamW<T> opt(tensors_of(model, {Part::kOmega}), adamw_config(sched.lr_heads, sched));

  std::size_t step = 0;
  for (int epoch = 1; epoch <= sched.concept_epochs; ++epoch) {
    auto rng = stage_rng(seed, kStage, epoch);
    for (const auto& idx : epoch_batches(train.size(), sched.batch_size, rng)) {
      auto xb = gather_rows(train.x, idx);
      std::vector<int> cb;
      for (auto i : idx) cb.push_back(train.concepts[i]);
      opt.zero_grad();
      auto loss = nn::softmax_cross_entropy<T>(model.omega.forward(xb), cb);
      check_loss(kStage, ++step, loss.item());
      loss.backward();
      opt.step();
      report.log("concept_head", loss.item());
    }
    report.log_epoch(kStage, epoch, {{"concept_accuracy", concept_accuracy(model, train, false)}});
  }
  guard.verify();
  model.omega.set_trainable(false);
}

template <typename T>
double train_reversal_step(CureModel<T>& model, const nn::Tensor<T>& xb, nn::AdamW<T>& opt) {
  auto cont = phi_of(model, xb);
  opt.zero_grad();
  auto loss = reconstruction_loss(model.phi_hat.forward(cont), xb);
  const double value = loss.item();
  check_loss("content_extractor/reversal", static_cast<std::size_t>(opt.step_count() + 1), value);
  loss.backward();
  opt.step();
  return value;
}

template <typename T>
void train_content_extractor(CureModel<T>& model, const Dataset<T>& train,
                             const StageSchedule& sched, const Hyperparameters& hp,
                             std::uint64_t seed, TrainReport& report) {
  constexpr const char* kStage = "content_extractor";
  const std::initializer_list<Part> trained = {Part::kPhi, Part::kPhiHat};
  FrozenGuard<T> guard(model, trained, kStage);
  nn::AdamW<T> opt_phi(tensors_of(model, {Part::kPhi}), adamw_config(sched.lr_extractor, sched));
  nn::AdamW<T> opt_rev(tensors_of(model, {Part::kPhiHat}), adamw_config(sched.lr_extractor, sched));

  auto epoch_log = [&](int epoch) {
    report.log_epoch(kStage, epoch,
                     {{"concept_accuracy_phi", concept_accuracy(model, train, true)},
                      {"concept_dropout", mean_concept_dropout(model, train, hp.tau)},
                      {"output_variance", output_variance(model, train)}});
  };
  epoch_log(0);

  std::size_t step = 0;
  for (int epoch = 1; epoch <= sched.extractor_epochs; ++epoch) {
    auto rng = stage_rng(seed, kStage, epoch);
    for (const auto& idx : epoch_batches(train.size(), sched.batch_size, rng)) {
      auto xb = gather_rows(train.x, idx);
      if (hp.use_reversal) {
        set_trainable_parts(model, {Part::kPhiHat});
        for (int r = 0; r < sched.alternation; ++r) {
          report.log("reversal", train_reversal_step(model, xb, opt_rev));
        }
      }

      set_trainable_parts(model, {Part::kPhi});
      opt_phi.zero_grad();
      auto cont = model.phi.forward(xb);
      auto l_concept = concept_dropout_loss(model.omega.forward(cont), hp.tau);
      auto total = l_concept;
      double content_value = 0.0;
      if (hp.use_reversal) {
        auto l_content = reconstruction_loss(model.phi_hat.forward(cont), xb);
        content_value = l_content.item();
        total = nn::add(l_concept, nn::scale(l_content, static_cast<T>(hp.lambda)));
      } else {
        nn::NoGradGuard ng;
        content_value = reconstruction_loss(model.phi_hat.forward(cont), xb).item();
      }
      check_loss(kStage, ++step, total.item());
      total.backward();
      opt_phi.step();
      report.log("concept_dropout", l_concept.item());
      report.log("content", content_value);
      report.log("extractor_total", total.item());
    }
    epoch_log(epoch);
  }
  set_trainable_parts(model, {});
  guard.verify();
}

template <typename T>
void train_debias(CureModel<T>& model, const Dataset<T>& train, const StageSchedule& sched,
                  const Hyperparameters& hp, std::uint64_t seed, TrainReport& report) {
  constexpr const char* kStage = "debias";
  if (hp.mode == Mode::kOff) throw ContractError("debias stage invoked with mode off");
  set_trainable_parts(model, {Part::kPsi});
  FrozenGuard<T> guard(model, {Part::kPsi}, kStage);
  nn::AdamW<T> opt(tensors_of(model, {Part::kPsi}), adamw_config(sched.lr_heads, sched));
  const auto cont_all = phi_of(model, train.x);

  std::size_t step = 0;
  nn::CosineDiagnostics diag;
  for (int epoch = 0;; ++epoch) {
    const auto stats = hinge_stats(model, train, hp.margin, hp.mode);
    report.log_epoch(kStage, epoch, {{"hinge_satisfied", stats.satisfied}, {"mean_cos", stats.mean_cos}});
    if (stats.satisfied >= kHingeSatisfiedFraction || epoch == sched.debias_epochs) break;
    auto rng = stage_rng(seed, kStage, epoch + 1);
    for (const auto& idx : epoch_batches(train.size(), sched.batch_size, rng)) {
      auto xb = gather_rows(train.x, idx);
      auto cb = gather_rows(cont_all, idx);
      opt.zero_grad();
      auto loss = margin_loss(model.psi.forward(xb), model.psi.forward(cb), hp.margin, hp.mode, &diag);
      check_loss(kStage, ++step, loss.item());
      loss.backward();
      opt.step();
      report.log("margin", loss.item());
    }
  }
  if (diag.degenerate > 0) {
    report.degenerate_cosines += diag.degenerate;
    report.warnings.push_back("debias: " + std::to_string(diag.degenerate) +
                              " zero-norm vectors in cosine similarity (denominator clamped)");
  }
  set_trainable_parts(model, {});
  guard.verify();
}

template <typename T>
void train_task_head(CureModel<T>& model, const Dataset<T>& train, const StageSchedule& sched,
                     const Hyperparameters& hp, std::uint64_t seed, TrainReport& report,
                     const EvalSets<T>& eval) {
  constexpr const char* kStage = "task_head";
  const Mode mode = hp.mode;
  const bool joint = mode != Mode::kOff;
  const bool with_margin = joint && hp.joint_margin_weight > 0.0;
  std::initializer_list<Part> trained = {Part::kTheta};
  std::initializer_list<Part> trained_joint = {Part::kTheta, Part::kPsi};
  const auto parts = joint ? trained_joint : trained;
  set_trainable_parts(model, parts);
  FrozenGuard<T> guard(model, parts, kStage);
  nn::AdamW<T> opt(tensors_of(model, parts), adamw_config(sched.lr_heads, sched));
  const auto cont_all = with_margin ? phi_of(model, train.x) : nn::Tensor<T>();
  nn::CosineDiagnostics diag;

  auto accuracy = [&](const Dataset<T>& d) {
    nn::NoGradGuard ng;
    const auto pred = argmax_rows(model.task_logits(d.x, mode));
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == d.labels[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(pred.size());
  };

  std::size_t step = 0;
  for (int epoch = 1; epoch <= sched.task_epochs; ++epoch) {
    auto rng = stage_rng(seed, kStage, epoch);
    for (const auto& idx : epoch_batches(train.size(), sched.batch_size, rng)) {
      auto xb = gather_rows(train.x, idx);
      std::vector<int> yb;
      for (auto i : idx) yb.push_back(train.labels[i]);
      opt.zero_grad();
      nn::Tensor<T> loss;
      if (with_margin) {
        auto z = model.psi.forward(xb);
        auto ce = nn::softmax_cross_entropy<T>(model.theta.forward(z), yb);
        auto zc = model.psi.forward(gather_rows(cont_all, idx));
        auto margin = margin_loss(z, zc, hp.margin, mode, &diag);
        loss = nn::add(ce, nn::scale(margin, static_cast<T>(hp.joint_margin_weight)));
        report.log("task", ce.item());
        report.log("joint_margin", margin.item());
      } else {
        loss = nn::softmax_cross_entropy<T>(model.task_logits(xb, mode), yb);
        report.log("task", loss.item());
      }
      check_loss(kStage, ++step, loss.item());
      loss.backward();
      opt.step();
    }
    std::map<std::string, double> values{{"train_accuracy", accuracy(train)}};
    if (eval.iid) values["iid_accuracy"] = accuracy(*eval.iid);
    if (eval.ood) values["ood_accuracy"] = accuracy(*eval.ood);
    report.log_epoch(kStage, epoch, std::move(values));
  }
  if (diag.degenerate > 0) {
    report.degenerate_cosines += diag.degenerate;
    report.warnings.push_back("task_head: " + std::to_string(diag.degenerate) +
                              " zero-norm vectors in cosine similarity (denominator clamped)");
  }
  set_trainable_parts(model, {});
  guard.verify();
}

#define CURE_INSTANTIATE_STAGES(T)                                                                \
  template nn::Tensor<T> gather_rows(const nn::Tensor<T>&, const std::vector<std::size_t>&);      \
  template std::vector<int> argmax_rows(const nn::Tensor<T>&);                                    \
  template double concept_accuracy(const CureModel<T>&, const Dataset<T>&, bool);                 \
  template double mean_concept_dropout(const CureModel<T>&, const Dataset<T>&, double);           \
  template double output_variance(const CureModel<T>&, const Dataset<T>&);                        \
  template HingeStats hinge_stats(const CureModel<T>&, const Dataset<T>&, double, Mode);          \
  template void set_trainable_parts(CureModel<T>&, std::initializer_list<Part>);                  \
  template void train_concept_head(CureModel<T>&, const Dataset<T>&, const StageSchedule&,        \
                                   std::uint64_t, TrainReport&);                                  \
  template double train_reversal_step(CureModel<T>&, const nn::Tensor<T>&, nn::AdamW<T>&);        \
  template void train_content_extractor(CureModel<T>&, const Dataset<T>&, const StageSchedule&,   \
                                        const Hyperparameters&, std::uint64_t, TrainReport&);     \
  template void train_debias(CureModel<T>&, const Dataset<T>&, const StageSchedule&,              \
                             const Hyperparameters&, std::uint64_t, TrainReport&);                \
  template void train_task_head(CureModel<T>&, const Dataset<T>&, const StageSchedule&,           \
                                const Hyperparameters&, std::uint64_t, TrainReport&,              \
                                const EvalSets<T>&);
CURE_INSTANTIATE_STAGES(float)
CURE_INSTANTIATE_STAGES(double)
#undef CURE_INSTANTIATE_STAGES

}  // namespace cure::pipeline
