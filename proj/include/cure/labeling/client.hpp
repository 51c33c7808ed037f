// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "cure/corpus/synthetic.hpp"
#include "cure/labeling/prompts.hpp"

namespace cure::labeling {

/// A text-completion backend. Implementations throw ClientError on transport
/// or protocol failure.
class AnnotatorClient {
 public:
  virtual ~AnnotatorClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{0};  // before the 2nd attempt
  double backoff_multiplier = 2.0;

  void validate() const;  // ConfigError
};

struct AuditRecord {
  TemplateId template_id = TemplateId::kPa;
  std::uint64_t content_hash = 0;  // FNV-1a of the rendered prompt
  int attempt = 1;
  std::string prompt;
  std::string response;
  std::string error;  // non-empty when the client threw
  std::string client;
};

nlohmann::json to_json(const AuditRecord& r);
AuditRecord audit_record_from_json(const nlohmann::json& j);

/// Append-only JSONL log of every request and response, keyed by
/// (template, prompt hash, attempt). Successful records double as a replay
/// cache. An empty path keeps the log in memory only. Thread-safe.
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(std::filesystem::path path);

  /// Appends and flushes before returning.
  void append(const AuditRecord& r);
  std::optional<std::string> lookup(TemplateId id, std::uint64_t hash, int attempt) const;

  std::size_t size() const;
  std::vector<AuditRecord> records() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  using Key = std::tuple<int, std::uint64_t, int>;
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<AuditRecord> records_;
  std::map<Key, std::string> cache_;
};

/// Client + retry policy + audit log. A request first consults the log and
/// only reaches the client on a miss.
class Annotator {
 public:
  Annotator(AnnotatorClient& client, AuditLog& log, RetryPolicy policy = {});

  /// Response for `attempt` (1-based) of `prompt`. Transport failures are
  /// retried with backoff; the last ClientError propagates.
  std::string request(TemplateId id, const std::string& prompt, int attempt);

  const RetryPolicy& policy() const { return policy_; }
  std::size_t client_calls() const { return client_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  AnnotatorClient& client_;
  AuditLog& log_;
  RetryPolicy policy_;
  std::atomic<std::size_t> client_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Replies from a queue, or from a callback when one is set. Throws
/// ClientError when exhausted.
class MockClient final : public AnnotatorClient {
 public:
  MockClient() = default;
  explicit MockClient(std::vector<std::string> replies);
  explicit MockClient(std::function<std::string(const std::string&)> fn);

  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "mock"; }

  std::size_t calls() const;
  std::vector<std::string> prompts() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
  std::function<std::string(const std::string&)> fn_;
  std::vector<std::string> prompts_;
};

/// Answers Pa, Pb and Pc prompts by keyword lookup against the generator's
/// concept clusters. Deterministic and network-free.
class OfflineClient final : public AnnotatorClient {
 public:
  explicit OfflineClient(const corpus::GeneratorMetadata& meta);

  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "offline"; }

  /// Concept name with the most cluster-keyword hits in `text`, ties to the
  /// lower cluster index; "unknown" without hits.
  std::string classify(const std::string& text) const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> keyword_to_cluster_;
};

struct LiveClientConfig {
  std::string endpoint;  // e.g. http://localhost:8080/v1/chat/completions
  std::string model;
  std::string auth_env = "CURE_ANNOTATOR_TOKEN";
  std::chrono::seconds timeout{60};
};

/// OpenAI-style chat completion over HTTP. https endpoints need a build with
/// CURE_ENABLE_TLS. The token is read from `auth_env` at construction, before
/// any network traffic; a missing token is a ConfigError naming the variable.
class LiveClient final : public AnnotatorClient {
 public:
  explicit LiveClient(LiveClientConfig cfg);

  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "live:" + cfg_.model; }

 private:
  LiveClientConfig cfg_;
  std::string token_;
  std::string scheme_host_;
  std::string path_;
};

}  // namespace cure::labeling
