// SPDX-License-Identifier: Apache-2.0
#include "cure/corpus/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "cure/common/errors.hpp"
#include "cure/common/rng.hpp"

namespace cure::corpus {

namespace {

using Bucket = std::vector<const Document*>;

/// Seeded subset of `n` items from `bucket`, returned in id order.
Bucket sample(Bucket bucket, std::size_t n, Rng& rng) {
  rng.shuffle(bucket);
  bucket.resize(std::min(n, bucket.size()));
  std::sort(bucket.begin(), bucket.end(),
            [](const Document* a, const Document* b) { return a->id < b->id; });
  return bucket;
}

std::vector<std::size_t> label_hist(const std::vector<Document>& docs, int n_labels) {
  std::vector<std::size_t> h(static_cast<std::size_t>(n_labels), 0);
  for (const auto& d : docs) ++h.at(static_cast<std::size_t>(d.label));
  return h;
}

}  // namespace

std::vector<int> DatasetSplit::train_concept_indices() const {
  std::vector<int> out;
  out.reserve(train.size());
  for (const auto& d : train) {
    auto it = std::find(concepts.begin(), concepts.end(), d.concept_label.value_or(""));
    if (it == concepts.end()) {
      throw LabelingIncompleteError("train document " + d.id + " has a concept outside the inventory");
    }
    out.push_back(static_cast<int>(it - concepts.begin()));
  }
  return out;
}

DatasetSplit build_splits(const std::vector<Document>& docs_in, const SplitOptions& options) {
  if (options.k < 1) throw ConfigError("split.k must be at least 1");
  if (!(options.iid_holdout_fraction > 0.0 && options.iid_holdout_fraction < 1.0)) {
    throw ConfigError("split.iid_holdout_fraction must lie in (0, 1)");
  }

  DatasetSplit split;
  std::vector<Document> docs;
  std::size_t unknown = 0;
  for (const auto& d : docs_in) {
    if (!d.concept_label) throw LabelingIncompleteError("document " + d.id + " has no concept label");
    if (*d.concept_label == kUnknownConcept) {
      ++unknown;
      continue;
    }
    docs.push_back(d);
  }
  if (unknown > 0) {
    split.warnings.push_back(std::to_string(unknown) + " documents with concept \"unknown\" excluded");
  }
  std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].id == docs[i - 1].id) throw ParseError("duplicate document id " + docs[i].id);
  }

  const int n_labels = std::max(label_count(docs_in), 2);
  const ConceptStats stats = concept_mi(docs, n_labels);
  split.concepts = stats.concepts;
  split.n_labels = n_labels;
  const std::size_t k = static_cast<std::size_t>(options.k);
  if (stats.concepts.size() < 2 * k) {
    throw DegenerateTaskError("need at least " + std::to_string(2 * k) + " distinct concepts, found " +
                              std::to_string(stats.concepts.size()));
  }

  // Rank by MI descending, ties broken by name ascending.
  std::vector<std::size_t> order(stats.concepts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (stats.mi[a] != stats.mi[b]) return stats.mi[a] > stats.mi[b];
    return stats.concepts[a] < stats.concepts[b];
  });

  std::map<std::string, std::vector<Bucket>> by_concept;
  for (const auto& d : docs) {
    auto& buckets = by_concept[*d.concept_label];
    buckets.resize(static_cast<std::size_t>(n_labels));
    buckets[static_cast<std::size_t>(d.label)].push_back(&d);
  }

  Rng rng(options.seed, "split");

  // Group A.
  std::vector<Bucket> group_a(static_cast<std::size_t>(n_labels));
  for (std::size_t i = 0; i < k; ++i) {
    const auto& name = stats.concepts[order[i]];
    split.top_concepts.push_back(name);
    split.top_mi.push_back(stats.mi[order[i]]);
    for (int y = 0; y < n_labels; ++y) {
      for (const auto* d : by_concept[name][static_cast<std::size_t>(y)]) group_a[y].push_back(d);
    }
  }
  std::size_t per_label = group_a[0].size();
  for (const auto& b : group_a) per_label = std::min(per_label, b.size());
  const auto n_iid = static_cast<std::size_t>(
      std::llround(options.iid_holdout_fraction * static_cast<double>(per_label)));
  if (n_iid == 0 || n_iid >= per_label) {
    throw DegenerateTaskError("Group A has " + std::to_string(per_label) +
                              " documents per label, too few for an iid holdout");
  }
  for (int y = 0; y < n_labels; ++y) {
    auto chosen = sample(group_a[static_cast<std::size_t>(y)], per_label, rng);
    rng.shuffle(chosen);
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      (i < n_iid ? split.iid_test : split.train).push_back(*chosen[i]);
    }
  }

  // Group B.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t ci = order[order.size() - 1 - i];
    const auto& name = stats.concepts[ci];
    auto& buckets = by_concept[name];
    std::size_t m = buckets[0].size();
    for (const auto& b : buckets) m = std::min(m, b.size());
    if (m == 0) {
      split.warnings.push_back("concept \"" + name +
                               "\" has no documents for some label; dropped from OOD test");
      continue;
    }
    split.bottom_concepts.push_back(name);
    split.bottom_mi.push_back(stats.mi[ci]);
    for (int y = 0; y < n_labels; ++y) {
      for (const auto* d : sample(buckets[static_cast<std::size_t>(y)], m, rng)) {
        split.ood_test.push_back(*d);
      }
    }
  }
  if (split.ood_test.empty()) throw DegenerateTaskError("OOD test set is empty after balancing");

  auto by_id = [](const Document& a, const Document& b) { return a.id < b.id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.iid_test.begin(), split.iid_test.end(), by_id);
  std::sort(split.ood_test.begin(), split.ood_test.end(), by_id);
  check_split_invariants(split);
  return split;
}

void check_split_invariants(const DatasetSplit& split) {
  auto balanced = [&](const std::vector<Document>& part, const char* what) {
    const auto h = label_hist(part, split.n_labels);
    if (part.empty() || std::any_of(h.begin(), h.end(), [&](auto v) { return v != h[0]; })) {
      throw DegenerateTaskError(std::string(what) + " is not label-balanced");
    }
  };
  balanced(split.train, "train");
  balanced(split.iid_test, "iid_test");

  std::map<std::string, std::size_t> concept_counts;
  for (const auto& c : split.concepts) concept_counts[c] = 0;
  for (const auto& d : split.train) ++concept_counts[d.concept_label.value_or("")];
  bool uneven = false;
  for (const auto& [name, n] : concept_counts) uneven = uneven || n != concept_counts.begin()->second;
  if (!uneven) throw DegenerateTaskError("train concept distribution is even");

  std::map<std::string, std::vector<std::size_t>> ood;
  for (const auto& d : split.ood_test) {
    auto& h = ood[d.concept_label.value_or("")];
    h.resize(static_cast<std::size_t>(split.n_labels), 0);
    ++h[static_cast<std::size_t>(d.label)];
  }
  for (const auto& [name, h] : ood) {
    if (std::any_of(h.begin(), h.end(), [&](auto v) { return v != h[0]; })) {
      throw DegenerateTaskError("OOD concept \"" + name + "\" is not label-balanced");
    }
  }

  std::set<std::string> ids;
  for (const auto* part : {&split.train, &split.iid_test, &split.ood_test}) {
    for (const auto& d : *part) {
      if (!ids.insert(d.id).second) throw DegenerateTaskError("document " + d.id + " appears twice");
    }
  }
}

nlohmann::json split_manifest(const DatasetSplit& split) {
  auto ids = [](const std::vector<Document>& part) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& d : part) a.push_back(d.id);
    return a;
  };
  nlohmann::json j;
  j["concepts"] = split.concepts;
  j["n_labels"] = split.n_labels;
  j["top_concepts"] = split.top_concepts;
  j["top_mi"] = split.top_mi;
  j["bottom_concepts"] = split.bottom_concepts;
  j["bottom_mi"] = split.bottom_mi;
  j["warnings"] = split.warnings;
  j["train"] = ids(split.train);
  j["iid_test"] = ids(split.iid_test);
  j["ood_test"] = ids(split.ood_test);
  return j;
}

void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << split_manifest(split).dump(1) << '\n';
}

DatasetSplit split_from_manifest(const nlohmann::json& m, const std::vector<Document>& docs) {
  std::unordered_map<std::string, const Document*> index;
  for (const auto& d : docs) index[d.id] = &d;
  auto collect = [&](const char* key) {
    std::vector<Document> out;
    for (const auto& id : m.at(key)) {
      auto it = index.find(id.get<std::string>());
      if (it == index.end()) throw ParseError(std::string("split manifest references unknown id in ") + key);
      out.push_back(*it->second);
    }
    return out;
  };
  DatasetSplit s;
  s.concepts = m.at("concepts").get<std::vector<std::string>>();
  s.n_labels = m.at("n_labels").get<int>();
  s.top_concepts = m.at("top_concepts").get<std::vector<std::string>>();
  s.top_mi = m.at("top_mi").get<std::vector<double>>();
  s.bottom_concepts = m.at("bottom_concepts").get<std::vector<std::string>>();
  s.bottom_mi = m.at("bottom_mi").get<std::vector<double>>();
  s.warnings = m.at("warnings").get<std::vector<std::string>>();
  s.train = collect("train");
  s.iid_test = collect("iid_test");
  s.ood_test = collect("ood_test");
  return s;
}

}  // namespace cure::corpus
