// SPDX-License-Identifier: Apache-2.0
#include "cure/labeling/client.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "cure/common/errors.hpp"
#include "cure/common/hash.hpp"
#include "cure/labeling/text.hpp"

namespace cure::labeling {

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw ConfigError("labeling.max_attempts must be at least 1");
  if (backoff.count() < 0) throw ConfigError("labeling.backoff_ms must be non-negative");
  if (!(backoff_multiplier >= 1.0)) throw ConfigError("labeling.backoff_multiplier must be >= 1");
}

nlohmann::json to_json(const AuditRecord& r) {
  nlohmann::json j = {{"template", to_string(r.template_id)},
                      {"hash", hex64(r.content_hash)},
                      {"attempt", r.attempt},
                      {"client", r.client},
                      {"prompt", r.prompt},
                      {"response", r.response}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

AuditRecord audit_record_from_json(const nlohmann::json& j) {
  AuditRecord r;
  r.template_id = template_from_string(j.at("template").get<std::string>());
  r.content_hash = std::stoull(j.at("hash").get<std::string>(), nullptr, 16);
  r.attempt = j.at("attempt").get<int>();
  r.client = j.value("client", "");
  r.prompt = j.value("prompt", "");
  r.response = j.value("response", "");
  r.error = j.value("error", "");
  return r;
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream ss(content);
  const bool complete_tail = content.empty() || content.back() == '\n';
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty()) continue;
    AuditRecord r;
    try {
      r = audit_record_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      // A torn final line from an interrupted run is dropped; anything else
      // means the log is corrupt.
      if (!complete_tail && ss.peek() == EOF) break;
      throw ParseError(path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (r.error.empty()) {
      cache_.emplace(Key{static_cast<int>(r.template_id), r.content_hash, r.attempt}, r.response);
    }
    records_.push_back(std::move(r));
  }
  if (!complete_tail) {
    // Rewrite without the torn line so later appends start on a fresh line.
    std::ofstream out(path_, std::ios::trunc);
    for (const auto& r : records_) out << to_json(r).dump() << '\n';
  }
}

void AuditLog::append(const AuditRecord& r) {
  std::lock_guard lock(mu_);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to audit log " + path_.string());
  }
  if (r.error.empty()) {
    cache_.emplace(Key{static_cast<int>(r.template_id), r.content_hash, r.attempt}, r.response);
  }
  records_.push_back(r);
}

std::optional<std::string> AuditLog::lookup(TemplateId id, std::uint64_t hash, int attempt) const {
  std::lock_guard lock(mu_);
  auto it = cache_.find(Key{static_cast<int>(id), hash, attempt});
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::vector<AuditRecord> AuditLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

Annotator::Annotator(AnnotatorClient& client, AuditLog& log, RetryPolicy policy)
    : client_(client), log_(log), policy_(policy) {
  policy_.validate();
}

std::string Annotator::request(TemplateId id, const std::string& prompt, int attempt) {
  const std::uint64_t hash = fnv1a64(prompt);
  if (auto hit = log_.lookup(id, hash, attempt)) {
    ++cache_hits_;
    return *hit;
  }
  auto delay = policy_.backoff;
  for (int t = 1;; ++t) {
    AuditRecord rec{id, hash, attempt, prompt, {}, {}, client_.name()};
    try {
      ++client_calls_;
      rec.response = client_.complete(prompt);
      log_.append(rec);
      return rec.response;
    } catch (const ClientError& e) {
      rec.error = e.what();
      log_.append(rec);
      if (t >= policy_.max_attempts) throw;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay = std::chrono::milliseconds(
        static_cast<long>(static_cast<double>(delay.count()) * policy_.backoff_multiplier));
  }
}

MockClient::MockClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}

MockClient::MockClient(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}

std::string MockClient::complete(const std::string& prompt) {
  std::lock_guard lock(mu_);
  prompts_.push_back(prompt);
  if (fn_) return fn_(prompt);
  if (next_ >= replies_.size()) throw ClientError("mock client has no replies left");
  return replies_[next_++];
}

std::size_t MockClient::calls() const {
  std::lock_guard lock(mu_);
  return prompts_.size();
}

std::vector<std::string> MockClient::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

OfflineClient::OfflineClient(const corpus::GeneratorMetadata& meta) : names_(meta.concept_names) {
  for (std::size_t c = 0; c < meta.concept_vocab.size(); ++c) {
    for (const auto& w : meta.concept_vocab[c]) keyword_to_cluster_.emplace(w, static_cast<int>(c));
  }
}

std::string OfflineClient::classify(const std::string& text) const {
  std::vector<int> hits(names_.size(), 0);
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    auto it = keyword_to_cluster_.find(tok);
    if (it != keyword_to_cluster_.end()) ++hits[static_cast<std::size_t>(it->second)];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < hits.size(); ++c) {
    if (hits[c] > hits[best]) best = c;
  }
  if (hits.empty() || hits[best] == 0) return corpus::kUnknownConcept;
  return names_[best];
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto name = normalize_concept(item);
    if (name) out.push_back(*name);
  }
  return out;
}

}  // namespace

std::string OfflineClient::complete(const std::string& prompt) {
  if (auto m = builtin_template(TemplateId::kPa).match(prompt)) {
    return classify(m->at("review"));
  }
  if (auto m = builtin_template(TemplateId::kPb).match(prompt)) {
    auto given = split_list(m->at("concepts"));
    std::vector<std::string> clusters;
    for (const auto& n : names_) {
      if (std::find(given.begin(), given.end(), n) != given.end()) clusters.push_back(n);
    }
    return join(clusters, ", ");
  }
  if (auto m = builtin_template(TemplateId::kPc).match(prompt)) {
    const std::string& concept_name = m->at("concept");
    auto labels = split_list(m->at("concept labels"));
    if (labels.empty()) return "";
    std::size_t best = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == concept_name) return labels[i];
      if (edit_distance(labels[i], concept_name) < edit_distance(labels[best], concept_name)) best = i;
    }
    return labels[best];
  }
  throw ClientError("offline client cannot answer a prompt that matches no template");
}

}  // namespace cure::labeling
