// SPDX-License-Identifier: Apache-2.0
#include "cure/pipeline/model.hpp"

#include <algorithm>
#include <cstring>

#include "cure/common/errors.hpp"
#include "cure/common/hash.hpp"
#include "cure/nn/ops.hpp"

namespace cure::pipeline {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kOff: return "off";
    case Mode::kRemoval: return "removal";
    case Mode::kEnhancement: return "enhancement";
  }
  return "?";
}

Mode mode_from_string(std::string_view s) {
  if (s == "off") return Mode::kOff;
  if (s == "removal") return Mode::kRemoval;
  if (s == "enhancement") return Mode::kEnhancement;
  throw ConfigError("model.mode must be one of off, removal, enhancement; got \"" + std::string(s) + "\"");
}

const char* to_string(Part part) {
  switch (part) {
    case Part::kOmega: return "omega";
    case Part::kPhi: return "phi";
    case Part::kPhiHat: return "phi_hat";
    case Part::kPsi: return "psi";
    case Part::kTheta: return "theta";
  }
  return "?";
}

std::size_t default_extractor_inner(std::size_t d) { return std::max<std::size_t>(2, d / 6); }
std::size_t default_debias_hidden(std::size_t d) { return std::max<std::size_t>(2, d / 3); }

template <typename T>
ContentExtractor<T>::ContentExtractor(std::size_t d, Rng& rng, std::size_t inner,
                                      double residual_init)
    : in_(d, d, rng),
      ln_in_(d),
      block_(d, inner ? inner : default_extractor_inner(d), rng),
      out_(d, d, rng),
      ln_out_(d),
      scale_(nn::Tensor<T>::full({d}, static_cast<T>(residual_init), true)) {}

template <typename T>
nn::Tensor<T> ContentExtractor<T>::forward(const nn::Tensor<T>& x, std::size_t seq_len) const {
  auto h = ln_in_.forward(in_.forward(x));
  h = block_.forward(h, seq_len);
  h = ln_out_.forward(out_.forward(h));
  return nn::add(x, nn::mul_row(h, scale_));
}

template <typename T>
void ContentExtractor<T>::collect_parameters(const std::string& prefix,
                                             std::vector<nn::NamedParam<T>>& out) const {
  in_.collect_parameters(nn::join_name(prefix, "in"), out);
  ln_in_.collect_parameters(nn::join_name(prefix, "ln_in"), out);
  block_.collect_parameters(nn::join_name(prefix, "block"), out);
  out_.collect_parameters(nn::join_name(prefix, "out"), out);
  ln_out_.collect_parameters(nn::join_name(prefix, "ln_out"), out);
  out.push_back({nn::join_name(prefix, "residual_scale"), scale_});
}

template <typename T>
void ContentExtractor<T>::make_identity() {
  for (auto& s : scale_.values()) s = T(0);
}

template <typename T>
DebiasModule<T>::DebiasModule(std::size_t d, Rng& rng, std::size_t hidden)
    : block_(d, hidden ? hidden : default_debias_hidden(d), rng), out_(d, d, rng) {}

template <typename T>
nn::Tensor<T> DebiasModule<T>::forward(const nn::Tensor<T>& x) const {
  return out_.forward(block_.forward(x));
}

template <typename T>
void DebiasModule<T>::collect_parameters(const std::string& prefix,
                                         std::vector<nn::NamedParam<T>>& out) const {
  block_.collect_parameters(nn::join_name(prefix, "swiglu"), out);
  out_.collect_parameters(nn::join_name(prefix, "out"), out);
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"dim", c.dim},
          {"n_concepts", c.n_concepts},
          {"n_labels", c.n_labels},
          {"extractor_inner", c.extractor_inner ? c.extractor_inner : default_extractor_inner(c.dim)},
          {"debias_hidden", c.debias_hidden ? c.debias_hidden : default_debias_hidden(c.dim)},
          {"residual_init", c.residual_init}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dim = j.value("dim", c.dim);
  c.n_concepts = j.value("n_concepts", c.n_concepts);
  c.n_labels = j.value("n_labels", c.n_labels);
  c.extractor_inner = j.value("extractor_inner", c.extractor_inner);
  c.debias_hidden = j.value("debias_hidden", c.debias_hidden);
  c.residual_init = j.value("residual_init", c.residual_init);
  return c;
}

namespace {
Rng part_rng(std::uint64_t seed, Part p) { return Rng(seed, std::string("init.") + to_string(p)); }
}  // namespace

template <typename T>
CureModel<T>::CureModel(const ModelConfig& cfg, std::uint64_t seed)
    : omega([&] {
        auto r = part_rng(seed, Part::kOmega);
        return nn::Linear<T>(cfg.dim, cfg.n_concepts, r);
      }()),
      phi([&] {
        auto r = part_rng(seed, Part::kPhi);
        return ContentExtractor<T>(cfg.dim, r, cfg.extractor_inner, cfg.residual_init);
      }()),
      phi_hat([&] {
        auto r = part_rng(seed, Part::kPhiHat);
        return ContentExtractor<T>(cfg.dim, r, cfg.extractor_inner, cfg.residual_init);
      }()),
      psi([&] {
        auto r = part_rng(seed, Part::kPsi);
        return DebiasModule<T>(cfg.dim, r, cfg.debias_hidden);
      }()),
      theta([&] {
        auto r = part_rng(seed, Part::kTheta);
        return nn::Linear<T>(cfg.dim, cfg.n_labels, r);
      }()),
      cfg_(cfg) {
  if (cfg.n_concepts < 2) throw DegenerateTaskError("concept head needs at least 2 concepts");
  if (cfg.n_labels < 2) throw DegenerateTaskError("task head needs at least 2 labels");
}

template <typename T>
const nn::Module<T>& CureModel<T>::part(Part p) const {
  switch (p) {
    case Part::kOmega: return omega;
    case Part::kPhi: return phi;
    case Part::kPhiHat: return phi_hat;
    case Part::kPsi: return psi;
    case Part::kTheta: return theta;
  }
  throw ContractError("unknown model part");
}

template <typename T>
nn::Module<T>& CureModel<T>::part(Part p) {
  return const_cast<nn::Module<T>&>(std::as_const(*this).part(p));
}

template <typename T>
std::vector<nn::NamedParam<T>> CureModel<T>::parameters(Part p) const {
  return part(p).parameters(to_string(p));
}

template <typename T>
std::vector<nn::NamedParam<T>> CureModel<T>::parameters() const {
  std::vector<nn::NamedParam<T>> out;
  for (Part p : kAllParts) part(p).collect_parameters(to_string(p), out);
  return out;
}

template <typename T>
std::uint64_t CureModel<T>::part_hash(Part p) const {
  std::uint64_t h = fnv1a64(to_string(p));
  for (const auto& np : parameters(p)) {
    h = fnv1a64(np.name, h);
    auto v = np.tensor.values();
    h = fnv1a64_bytes(std::as_bytes(v), h);
  }
  return h;
}

template <typename T>
nn::Tensor<T> CureModel<T>::task_logits(const nn::Tensor<T>& x, Mode mode) const {
  return mode == Mode::kOff ? theta.forward(x) : theta.forward(psi.forward(x));
}

ParamCounts parameter_counts(std::size_t dim) {
  Rng rng(0);
  ParamCounts c;
  c.dim = dim;
  c.extractor = ContentExtractor<float>(dim, rng).parameter_count();
  c.debias = DebiasModule<float>(dim, rng).parameter_count();
  return c;
}

template class ContentExtractor<float>;
template class ContentExtractor<double>;
template class DebiasModule<float>;
template class DebiasModule<double>;
template class CureModel<float>;
template class CureModel<double>;

}  // namespace cure::pipeline
