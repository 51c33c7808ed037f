// SPDX-License-Identifier: Apache-2.0
#include "cure/labeling/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "cure/common/errors.hpp"
#include "cure/labeling/text.hpp"

namespace cure::labeling {

using corpus::Document;
using corpus::kUnknownConcept;

nlohmann::json to_json(const DocError& e) {
  return {{"id", e.id}, {"stage", e.stage}, {"message", e.message}};
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next++;
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

struct OneLabel {
  std::string concept_name = kUnknownConcept;
  std::string error;
};

OneLabel label_one(const std::string& text, Annotator& annotator) {
  OneLabel out;
  if (text.empty()) {
    out.error = "text is empty after cleaning";
    return out;
  }
  const auto prompt = builtin_template(TemplateId::kPa).render({{"review", text}});
  std::string last;
  const int attempts = annotator.policy().max_attempts;
  for (int a = 1; a <= attempts; ++a) {
    try {
      last = annotator.request(TemplateId::kPa, prompt, a);
    } catch (const ClientError& e) {
      out.error = std::string("annotator failed: ") + e.what();
      return out;
    }
    if (auto name = normalize_concept(last)) {
      if (*name == kUnknownConcept) {
        out.error = "annotator could not identify a concept";
        return out;
      }
      out.concept_name = *name;
      return out;
    }
  }
  out.error = "no one-word reply after " + std::to_string(attempts) + " attempts (last: \"" +
              last.substr(0, 80) + "\")";
  return out;
}

}  // namespace

LabelResult label_concepts(const std::vector<Document>& docs, Annotator& annotator,
                           const LabelOptions& opts) {
  LabelResult res;
  res.docs = docs;
  std::vector<OneLabel> labels(docs.size());
  parallel_for(docs.size(), opts.concurrency,
               [&](std::size_t i) { labels[i] = label_one(docs[i].text, annotator); });
  for (std::size_t i = 0; i < docs.size(); ++i) {
    res.docs[i].concept_label = labels[i].concept_name;
    if (!labels[i].error.empty()) res.errors.push_back({docs[i].id, "label", labels[i].error});
  }
  return res;
}

std::vector<std::string> merge_meta_concepts(const std::vector<std::string>& raw_concepts,
                                             Annotator& annotator) {
  std::set<std::string> distinct;
  for (const auto& c : raw_concepts) {
    if (c != kUnknownConcept && !c.empty()) distinct.insert(c);
  }
  if (distinct.empty()) throw ConfigError("merge_meta_concepts: no raw concepts to merge");
  const auto prompt = builtin_template(TemplateId::kPb).render(
      {{"concepts", join({distinct.begin(), distinct.end()}, ", ")}});
  std::string last;
  const int attempts = annotator.policy().max_attempts;
  for (int a = 1; a <= attempts; ++a) {
    last = annotator.request(TemplateId::kPb, prompt, a);
    if (auto list = parse_concept_list(last)) {
      std::sort(list->begin(), list->end());
      return *list;
    }
  }
  throw ParseError("meta-concept reply is not a list of distinct one-word names after " +
                   std::to_string(attempts) + " attempts: \"" + last.substr(0, 120) + "\"");
}

Assignment assign_final_concept(const std::string& raw, const std::vector<std::string>& concepts,
                                Annotator& annotator) {
  if (concepts.empty()) throw ConfigError("assign_final_concept: concept set is empty");
  const auto prompt = builtin_template(TemplateId::kPc).render(
      {{"concept", raw}, {"concept labels", join(concepts, ", ")}});
  std::string probe = raw;
  const int attempts = annotator.policy().max_attempts;
  for (int a = 1; a <= attempts; ++a) {
    auto name = normalize_concept(annotator.request(TemplateId::kPc, prompt, a));
    if (!name) continue;
    if (std::find(concepts.begin(), concepts.end(), *name) != concepts.end()) return {*name, {}};
    probe = *name;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < concepts.size(); ++i) {
    if (edit_distance(probe, concepts[i]) < edit_distance(probe, concepts[best])) best = i;
  }
  return {concepts[best], "\"" + raw + "\": no reply named a member of the concept set; nearest by "
                              "edit distance to \"" + probe + "\" is \"" + concepts[best] + "\""};
}

LabelingOutcome run_labeling(const std::vector<Document>& docs, Annotator& annotator,
                             const LabelOptions& opts) {
  LabelingOutcome out;
  std::vector<Document> cleaned = docs;
  for (auto& d : cleaned) {
    d.text = clean_text(d.text);
    d.concept_label.reset();
  }
  auto labeled = label_concepts(cleaned, annotator, opts);
  out.errors = labeled.errors;

  std::vector<std::string> raw;
  for (const auto& d : labeled.docs) raw.push_back(*d.concept_label);
  out.concepts = merge_meta_concepts(raw, annotator);

  // Assign each distinct raw concept once; documents sharing it share the
  // answer.
  std::vector<std::string> distinct;
  for (const auto& r : std::set<std::string>(raw.begin(), raw.end())) {
    if (r != kUnknownConcept) distinct.push_back(r);
  }
  std::vector<Assignment> assigned(distinct.size());
  std::vector<std::string> failures(distinct.size());
  parallel_for(distinct.size(), opts.concurrency, [&](std::size_t i) {
    try {
      assigned[i] = assign_final_concept(distinct[i], out.concepts, annotator);
    } catch (const ClientError& e) {
      failures[i] = std::string("annotator failed: ") + e.what();
    }
  });
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    index[distinct[i]] = i;
    if (!assigned[i].warning.empty()) out.warnings.push_back(assigned[i].warning);
  }

  out.docs = docs;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string& r = raw[i];
    if (r == kUnknownConcept) {
      out.docs[i].concept_label = kUnknownConcept;
      continue;
    }
    const std::size_t k = index.at(r);
    if (!failures[k].empty()) {
      out.docs[i].concept_label = kUnknownConcept;
      out.errors.push_back({docs[i].id, "assign", failures[k]});
    } else {
      out.docs[i].concept_label = assigned[k].concept_name;
    }
  }
  out.client_calls = annotator.client_calls();
  out.cache_hits = annotator.cache_hits();
  return out;
}

nlohmann::json summary_json(const LabelingOutcome& out) {
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : out.errors) errors.push_back(to_json(e));
  std::map<std::string, int> counts;
  for (const auto& d : out.docs) ++counts[d.concept_label.value_or(kUnknownConcept)];
  return {{"concepts", out.concepts},   {"counts", counts},
          {"errors", errors},           {"warnings", out.warnings},
          {"client_calls", out.client_calls}, {"cache_hits", out.cache_hits}};
}

std::vector<Document> offline_annotate(const std::vector<Document>& docs,
                                       const corpus::GeneratorMetadata& meta) {
  OfflineClient lookup(meta);
  std::vector<Document> out = docs;
  for (auto& d : out) d.concept_label = lookup.classify(d.text);
  return out;
}

}  // namespace cure::labeling
