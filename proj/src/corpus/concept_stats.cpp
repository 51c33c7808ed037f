// SPDX-License-Identifier: Apache-2.0
#include "cure/corpus/concept_stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cure/common/errors.hpp"

namespace cure::corpus {

int ConceptStats::index_of(const std::string& name) const {
  auto it = std::lower_bound(concepts.begin(), concepts.end(), name);
  if (it == concepts.end() || *it != name) return -1;
  return static_cast<int>(it - concepts.begin());
}

std::vector<double> concept_mi_from_counts(const std::vector<std::vector<std::size_t>>& joint) {
  std::size_t total = 0;
  std::vector<std::size_t> col;
  for (const auto& row : joint) {
    if (col.size() < row.size()) col.resize(row.size(), 0);
    for (std::size_t y = 0; y < row.size(); ++y) {
      col[y] += row[y];
      total += row[y];
    }
  }
  std::vector<double> out(joint.size(), 0.0);
  if (total == 0) return out;
  const double n = static_cast<double>(total);
  for (std::size_t c = 0; c < joint.size(); ++c) {
    std::size_t row_total = 0;
    for (auto v : joint[c]) row_total += v;
    double acc = 0.0;
    for (std::size_t y = 0; y < joint[c].size(); ++y) {
      if (joint[c][y] == 0) continue;
      const double pcy = static_cast<double>(joint[c][y]) / n;
      const double pc = static_cast<double>(row_total) / n;
      const double py = static_cast<double>(col[y]) / n;
      acc += pcy * std::log(pcy / (pc * py));
    }
    out[c] = acc;
  }
  return out;
}

ConceptStats concept_mi(const std::vector<Document>& docs, int n_labels) {
  std::map<std::string, std::vector<std::size_t>> counts;
  const int k = n_labels > 0 ? n_labels : label_count(docs);
  for (const auto& d : docs) {
    if (!d.concept_label) throw LabelingIncompleteError("document " + d.id + " has no concept label");
    if (d.label < 0 || d.label >= k) {
      throw IndexError("document " + d.id + " has label " + std::to_string(d.label) +
                       " outside [0, " + std::to_string(k) + ")");
    }
    auto& row = counts[*d.concept_label];
    row.resize(static_cast<std::size_t>(k), 0);
    ++row[static_cast<std::size_t>(d.label)];
  }

  ConceptStats s;
  s.n_labels = k;
  s.label_totals.assign(static_cast<std::size_t>(k), 0);
  for (auto& [name, row] : counts) {
    s.concepts.push_back(name);
    std::size_t row_total = 0;
    for (std::size_t y = 0; y < row.size(); ++y) {
      row_total += row[y];
      s.label_totals[y] += row[y];
    }
    s.concept_totals.push_back(row_total);
    s.total += row_total;
    s.joint.push_back(row);
  }
  s.mi = concept_mi_from_counts(s.joint);
  return s;
}

}  // namespace cure::corpus
