// SPDX-License-Identifier: Apache-2.0
#include "cure/corpus/synthetic.hpp"

#include <array>
#include <cstdio>
#include <sstream>

#include "cure/common/errors.hpp"
#include "cure/common/rng.hpp"

namespace cure::corpus {

namespace {

constexpr std::array<const char*, 12> kConceptNames = {
    "acting", "plot",    "visuals", "music",   "humor",   "genre",
    "pacing", "dialogue", "casting", "ending", "setting", "effects"};

constexpr std::string_view kOnsets = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("corpus." + field + " " + why);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string pseudo_word(std::size_t i) {
  // Bijective base-70 syllable encoding with a minimum of two syllables.
  const std::size_t base = kOnsets.size() * kVowels.size();
  std::size_t v = i + base;
  std::string out;
  while (true) {
    const std::size_t s = v % base;
    out.insert(0, {kOnsets[s / kVowels.size()], kVowels[s % kVowels.size()]});
    if (v < base) break;
    v = v / base - 1;
  }
  return out;
}

std::string concept_name(int i) {
  if (i >= 0 && static_cast<std::size_t>(i) < kConceptNames.size()) return kConceptNames[i];
  return "concept" + std::to_string(i);
}

void SyntheticSpec::validate() const {
  require(n_labels >= 2, "n_labels", "must be at least 2, got " + std::to_string(n_labels));
  require(n_concepts >= 2, "n_concepts", "must be at least 2, got " + std::to_string(n_concepts));
  require(n_biased >= 0 && n_biased <= n_concepts, "n_biased",
          "must lie in [0, n_concepts], got " + std::to_string(n_biased));
  require(n_documents >= n_concepts, "n_documents",
          "must be at least n_concepts, got " + std::to_string(n_documents));
  require(bias >= 0.5 && bias <= 1.0, "bias", "must lie in [0.5, 1], got " + fmt_double(bias));
  require(concept_vocab_size >= 1, "concept_vocab_size", "must be positive");
  require(sentiment_vocab_size >= 1, "sentiment_vocab_size", "must be positive");
  require(concept_tokens >= 1, "concept_tokens", "must be positive");
  require(sentiment_tokens >= 0, "sentiment_tokens", "must be non-negative");
  require(noise_tokens >= 0, "noise_tokens", "must be non-negative");
  require(sentiment_purity >= 0.0 && sentiment_purity <= 1.0, "sentiment_purity",
          "must lie in [0, 1], got " + fmt_double(sentiment_purity));
  const long needed = static_cast<long>(n_concepts) * concept_vocab_size +
                      static_cast<long>(n_labels) * sentiment_vocab_size + 1;
  require(vocabulary_size >= needed, "vocabulary_size",
          "is too small to keep concept and sentiment clusters disjoint: need at least " +
              std::to_string(needed) + ", got " + std::to_string(vocabulary_size));
}

nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"n_labels", s.n_labels},
          {"n_concepts", s.n_concepts},
          {"n_biased", s.n_biased},
          {"n_documents", s.n_documents},
          {"bias", s.bias},
          {"vocabulary_size", s.vocabulary_size},
          {"concept_vocab_size", s.concept_vocab_size},
          {"sentiment_vocab_size", s.sentiment_vocab_size},
          {"sentiment_tokens", s.sentiment_tokens},
          {"concept_tokens", s.concept_tokens},
          {"noise_tokens", s.noise_tokens},
          {"sentiment_purity", s.sentiment_purity},
          {"seed", s.seed}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n_labels = j.value("n_labels", s.n_labels);
  s.n_concepts = j.value("n_concepts", s.n_concepts);
  s.n_biased = j.value("n_biased", s.n_biased);
  s.n_documents = j.value("n_documents", s.n_documents);
  s.bias = j.value("bias", s.bias);
  s.vocabulary_size = j.value("vocabulary_size", s.vocabulary_size);
  s.concept_vocab_size = j.value("concept_vocab_size", s.concept_vocab_size);
  s.sentiment_vocab_size = j.value("sentiment_vocab_size", s.sentiment_vocab_size);
  s.sentiment_tokens = j.value("sentiment_tokens", s.sentiment_tokens);
  s.concept_tokens = j.value("concept_tokens", s.concept_tokens);
  s.noise_tokens = j.value("noise_tokens", s.noise_tokens);
  s.sentiment_purity = j.value("sentiment_purity", s.sentiment_purity);
  s.seed = j.value("seed", s.seed);
  return s;
}

nlohmann::json to_json(const GeneratorMetadata& m) {
  return {{"concept_names", m.concept_names},
          {"concept_vocab", m.concept_vocab},
          {"sentiment_vocab", m.sentiment_vocab},
          {"favored_label", m.favored_label},
          {"spec", to_json(m.spec)}};
}

GeneratorMetadata generator_metadata_from_json(const nlohmann::json& j) {
  GeneratorMetadata m;
  m.concept_names = j.at("concept_names").get<std::vector<std::string>>();
  m.concept_vocab = j.at("concept_vocab").get<std::vector<std::vector<std::string>>>();
  m.sentiment_vocab = j.at("sentiment_vocab").get<std::vector<std::vector<std::string>>>();
  m.favored_label = j.at("favored_label").get<std::vector<int>>();
  m.spec = synthetic_spec_from_json(j.at("spec"));
  return m;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus out;
  auto& meta = out.metadata;
  meta.spec = spec;

  // Disjoint slices of the word pool: concept clusters, then per-label
  // sentiment words, then noise.
  std::size_t next = 0;
  for (int c = 0; c < spec.n_concepts; ++c) {
    meta.concept_names.push_back(concept_name(c));
    auto& vocab = meta.concept_vocab.emplace_back();
    for (int w = 0; w < spec.concept_vocab_size; ++w) vocab.push_back(pseudo_word(next++));
    meta.favored_label.push_back(c < spec.n_biased ? c % spec.n_labels : -1);
  }
  for (int y = 0; y < spec.n_labels; ++y) {
    auto& vocab = meta.sentiment_vocab.emplace_back();
    for (int w = 0; w < spec.sentiment_vocab_size; ++w) vocab.push_back(pseudo_word(next++));
  }
  std::vector<std::string> noise;
  for (std::size_t i = next; i < static_cast<std::size_t>(spec.vocabulary_size); ++i) {
    noise.push_back(pseudo_word(i));
  }

  Rng rng(spec.seed, "corpus.generate");
  auto other_label = [&](int y) {
    int o = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_labels - 1)));
    return o >= y ? o + 1 : o;
  };

  const int per = spec.n_documents / spec.n_concepts;
  const int rem = spec.n_documents % spec.n_concepts;
  int serial = 0;
  for (int c = 0; c < spec.n_concepts; ++c) {
    const int count = per + (c < rem ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      int y;
      if (meta.favored_label[c] >= 0) {
        const int fav = meta.favored_label[c];
        y = rng.bernoulli(spec.bias) ? fav : other_label(fav);
      } else {
        y = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_labels)));
      }
      std::vector<std::string> tokens;
      for (int t = 0; t < spec.sentiment_tokens; ++t) {
        const int src = rng.bernoulli(spec.sentiment_purity) ? y : other_label(y);
        const auto& v = meta.sentiment_vocab[src];
        tokens.push_back(v[rng.index(v.size())]);
      }
      const auto& cv = meta.concept_vocab[c];
      for (int t = 0; t < spec.concept_tokens; ++t) tokens.push_back(cv[rng.index(cv.size())]);
      for (int t = 0; t < spec.noise_tokens; ++t) tokens.push_back(noise[rng.index(noise.size())]);
      rng.shuffle(tokens);

      std::string text;
      for (const auto& tok : tokens) {
        if (!text.empty()) text.push_back(' ');
        text += tok;
      }
      char id[32];
      std::snprintf(id, sizeof(id), "doc-%06d", serial++);
      out.documents.push_back(Document{id, std::move(text), y, meta.concept_names[c]});
    }
  }
  return out;
}

}  // namespace cure::corpus
