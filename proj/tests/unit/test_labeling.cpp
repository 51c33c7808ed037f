// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cure/common/errors.hpp"
#include "cure/common/rng.hpp"
#include "cure/corpus/synthetic.hpp"
#include "cure/labeling/client.hpp"
#include "cure/labeling/pipeline.hpp"
#include "cure/labeling/prompts.hpp"
#include "cure/labeling/text.hpp"
#include "oracles.hpp"

using namespace cure;
using namespace cure::labeling;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<corpus::Document> small_corpus(int n, std::uint64_t seed = 1) {
  corpus::SyntheticSpec spec;
  spec.n_documents = n;
  spec.seed = seed;
  return corpus::generate_synthetic(spec).documents;
}

}  // namespace

TEST_SUITE("labeling") {

TEST_CASE("clean_text examples") {
  CHECK(clean_text("good caf\xc3\xa9!") == "good caf!");
  CHECK(clean_text("a  b\t c") == "a b c");
  CHECK(clean_text("\xf0\x9f\x98\x80\xf0\x9f\x8e\x89") == "");
  CHECK(clean_text("  x\x01y \n") == "xy");
}

TEST_CASE("clean_text output is printable ASCII with single spaces") {
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    std::string raw;
    const std::size_t n = rng.index(40);
    for (std::size_t i = 0; i < n; ++i) raw.push_back(static_cast<char>(rng.index(256)));
    const auto out = clean_text(raw);
    for (char c : out) CHECK((c >= 0x20 && c < 0x7f));
    CHECK(out.find("  ") == std::string::npos);
    if (!out.empty()) {
      CHECK(out.front() != ' ');
      CHECK(out.back() != ' ');
    }
    CHECK(clean_text(out) == out);
  }
}

TEST_CASE("normalize_concept") {
  CHECK(normalize_concept("plot") == "plot");
  CHECK(normalize_concept("  Genre.\n") == "genre");
  CHECK(normalize_concept("\"Sci-Fi\"") == "sci-fi");
  CHECK_FALSE(normalize_concept("the plot was bad").has_value());
  CHECK_FALSE(normalize_concept("").has_value());
  CHECK_FALSE(normalize_concept("...").has_value());
}

TEST_CASE("parse_concept_list") {
  CHECK(parse_concept_list("acting, plot, visuals") ==
        std::vector<std::string>{"acting", "plot", "visuals"});
  CHECK(parse_concept_list("1. Acting: performances\n2. Plot: story") ==
        std::vector<std::string>{"acting", "plot"});
  CHECK(parse_concept_list("- acting\n- plot\n") == std::vector<std::string>{"acting", "plot"});
  CHECK_FALSE(parse_concept_list("plot, plot").has_value());
  CHECK_FALSE(parse_concept_list("plot, special effects").has_value());
  CHECK_FALSE(parse_concept_list("").has_value());
}

TEST_CASE("edit distance matches the DP oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::string a, b;
    for (std::size_t i = rng.index(10); i > 0; --i) a.push_back(static_cast<char>('a' + rng.index(4)));
    for (std::size_t i = rng.index(10); i > 0; --i) b.push_back(static_cast<char>('a' + rng.index(4)));
    CHECK(edit_distance(a, b) == testing::edit_distance_oracle(a, b));
  }
}

TEST_CASE("template rendering") {
  const auto& pa = builtin_template(TemplateId::kPa);
  CHECK(pa.slots() == std::vector<std::string>{"review"});
  const auto prompt = pa.render({{"review", "great acting"}});
  CHECK(prompt.find("great acting") != std::string::npos);
  CHECK(prompt.find("{review}") == std::string::npos);
  auto back = pa.match(prompt);
  REQUIRE(back.has_value());
  CHECK(back->at("review") == "great acting");
  CHECK_FALSE(builtin_template(TemplateId::kPb).match(prompt).has_value());

  CHECK_THROWS_AS(pa.render({}), ConfigError);
  CHECK_THROWS_AS(pa.render({{"review", "x"}, {"extra", "y"}}), ConfigError);
  const auto& pc = builtin_template(TemplateId::kPc);
  CHECK(pc.slots() == std::vector<std::string>{"concept", "concept labels"});
  CHECK_THROWS_AS(pc.render({{"concept", "x"}}), ConfigError);
}

TEST_CASE("compiled-in templates equal the prompt files") {
  const std::filesystem::path dir = std::filesystem::path(CURE_SOURCE_DIR) / "prompts";
  for (auto id : kAllTemplates) {
    std::ifstream in(dir / file_name(id), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(builtin_template(id).body() == ss.str());
    CHECK(load_template(id, dir).body() == ss.str());
  }
  CHECK_THROWS_AS(load_template(TemplateId::kPa, "/nonexistent"), IoError);
  CHECK(template_from_string("Pb") == TemplateId::kPb);
}

TEST_CASE("label_concepts happy path and normalization") {
  auto docs = small_corpus(6);
  MockClient client(std::vector<std::string>{"plot", "  Genre.\n", "plot", "plot", "plot", "plot"});
  AuditLog log;
  Annotator annotator(client, log);
  auto res = label_concepts({docs[0], docs[1]}, annotator);
  CHECK(*res.docs[0].concept_label == "plot");
  CHECK(*res.docs[1].concept_label == "genre");
  CHECK(res.errors.empty());
  CHECK(log.size() == 2);
}

TEST_CASE("sentence replies exhaust retries to unknown") {
  auto docs = small_corpus(6);
  MockClient client([](const std::string&) { return std::string("This review is about the plot."); });
  AuditLog log;
  Annotator annotator(client, log);
  auto res = label_concepts({docs[0]}, annotator);
  CHECK(*res.docs[0].concept_label == corpus::kUnknownConcept);
  REQUIRE(res.errors.size() == 1);
  CHECK(res.errors[0].stage == "label");
  CHECK(client.calls() == 3);
}

TEST_CASE("client failure yields unknown with an error, never a drop") {
  auto docs = small_corpus(12);
  MockClient client;  // always exhausted
  AuditLog log;
  Annotator annotator(client, log, RetryPolicy{2, std::chrono::milliseconds(0), 2.0});
  auto res = label_concepts(docs, annotator);
  CHECK(res.docs.size() == docs.size());
  CHECK(res.errors.size() == docs.size());
  for (const auto& d : res.docs) CHECK(*d.concept_label == corpus::kUnknownConcept);
  // Each failed attempt is logged as an error record.
  for (const auto& r : log.records()) CHECK_FALSE(r.error.empty());
}

TEST_CASE("empty text is flagged without calling the client") {
  corpus::Document d{"x", "", 0, std::nullopt};
  MockClient client(std::vector<std::string>{"plot"});
  AuditLog log;
  Annotator annotator(client, log);
  auto res = label_concepts({d}, annotator);
  CHECK(*res.docs[0].concept_label == corpus::kUnknownConcept);
  CHECK(res.errors.size() == 1);
  CHECK(client.calls() == 0);
}

TEST_CASE("merge_meta_concepts parses and validates") {
  {
    MockClient client(std::vector<std::string>{"acting, plot, visuals"});
    AuditLog log;
    Annotator annotator(client, log);
    auto c = merge_meta_concepts({"story", "acting", "cgi", "unknown"}, annotator);
    CHECK(c == std::vector<std::string>{"acting", "plot", "visuals"});
    auto prompt = client.prompts().at(0);
    CHECK(prompt.find("unknown") == std::string::npos);
  }
  {
    MockClient client([](const std::string&) { return std::string("plot, plot"); });
    AuditLog log;
    Annotator annotator(client, log);
    CHECK_THROWS_AS(merge_meta_concepts({"story"}, annotator), ParseError);
    CHECK(client.calls() == 3);
  }
  {
    MockClient client;
    AuditLog log;
    Annotator annotator(client, log);
    CHECK_THROWS_AS(merge_meta_concepts({}, annotator), ConfigError);
  }
}

TEST_CASE("assign_final_concept paths") {
  const std::vector<std::string> concepts{"acting", "plot", "visuals"};
  {
    MockClient client(std::vector<std::string>{"plot"});
    AuditLog log;
    Annotator annotator(client, log);
    auto a = assign_final_concept("storyline", concepts, annotator);
    CHECK(a.concept_name == "plot");
    CHECK(a.warning.empty());
  }
  {
    MockClient client(std::vector<std::string>{"Plot "});
    AuditLog log;
    Annotator annotator(client, log);
    CHECK(assign_final_concept("storyline", concepts, annotator).concept_name == "plot");
  }
  {
    MockClient client([](const std::string&) { return std::string("plots"); });
    AuditLog log;
    Annotator annotator(client, log);
    auto a = assign_final_concept("storyline", concepts, annotator);
    CHECK(a.concept_name == "plot");
    CHECK_FALSE(a.warning.empty());
    CHECK(client.calls() == 3);
  }
  {
    MockClient client;
    AuditLog log;
    Annotator annotator(client, log);
    CHECK_THROWS_AS(assign_final_concept("x", {}, annotator), ConfigError);
  }
}

TEST_CASE("offline annotation agrees with ground truth") {
  corpus::SyntheticSpec spec;
  spec.n_documents = 600;
  auto corpus = corpus::generate_synthetic(spec);
  auto docs = corpus.documents;
  for (auto& d : docs) d.concept_label.reset();

  auto direct = offline_annotate(docs, corpus.metadata);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(direct[i].concept_label == corpus.documents[i].concept_label);
  }

  OfflineClient client(corpus.metadata);
  AuditLog log;
  Annotator annotator(client, log);
  auto out = run_labeling(docs, annotator);
  std::set<std::string> got(out.concepts.begin(), out.concepts.end());
  std::set<std::string> want(corpus.metadata.concept_names.begin(),
                             corpus.metadata.concept_names.end());
  CHECK(got == want);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(out.docs[i].concept_label == corpus.documents[i].concept_label);
  }

  // A document stripped of every cluster keyword has no concept.
  CHECK(client.classify("zzz qqq") == corpus::kUnknownConcept);
}

TEST_CASE("warm audit log replays without client calls") {
  corpus::SyntheticSpec spec;
  spec.n_documents = 120;
  auto corpus = corpus::generate_synthetic(spec);
  const auto dir = fresh_dir("cure_audit_test");
  const auto path = dir / "audit.jsonl";

  LabelingOutcome first;
  {
    OfflineClient client(corpus.metadata);
    AuditLog log(path);
    Annotator annotator(client, log);
    first = run_labeling(corpus.documents, annotator);
    CHECK(first.client_calls > 0);
  }
  {
    MockClient client;  // any call would throw
    AuditLog log(path);
    Annotator annotator(client, log);
    auto second = run_labeling(corpus.documents, annotator);
    CHECK(second.client_calls == 0);
    CHECK(client.calls() == 0);
    CHECK(second.docs == first.docs);
    CHECK(second.concepts == first.concepts);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("torn final audit line is dropped") {
  const auto dir = fresh_dir("cure_audit_torn");
  const auto path = dir / "audit.jsonl";
  {
    AuditLog log(path);
    AuditRecord r;
    r.prompt = "p";
    r.response = "plot";
    r.content_hash = 7;
    log.append(r);
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"template\": \"Pa\", \"hash";
  }
  AuditLog log(path);
  CHECK(log.size() == 1);
  CHECK(log.lookup(TemplateId::kPa, 7, 1) == "plot");
  std::filesystem::remove_all(dir);
}

TEST_CASE("retry policy retries transport errors") {
  int n = 0;
  MockClient client([&](const std::string&) -> std::string {
    if (++n < 3) throw ClientError("boom");
    return "plot";
  });
  AuditLog log;
  Annotator annotator(client, log);
  CHECK(annotator.request(TemplateId::kPa, "p", 1) == "plot");
  CHECK(annotator.client_calls() == 3);
  CHECK(log.size() == 3);

  RetryPolicy bad;
  bad.max_attempts = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("concurrent labeling matches sequential") {
  corpus::SyntheticSpec spec;
  spec.n_documents = 240;
  auto corpus = corpus::generate_synthetic(spec);
  auto run = [&](int concurrency) {
    OfflineClient client(corpus.metadata);
    AuditLog log;
    Annotator annotator(client, log);
    return run_labeling(corpus.documents, annotator, LabelOptions{concurrency});
  };
  auto seq = run(1);
  auto par = run(4);
  CHECK(seq.docs == par.docs);
  CHECK(seq.concepts == par.concepts);
  CHECK(seq.client_calls == par.client_calls);
}

TEST_CASE("live client needs its token before any network") {
  LiveClientConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.model = "m";
  cfg.auth_env = "CURE_TEST_TOKEN_THAT_IS_NOT_SET";
  try {
    LiveClient client(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("CURE_TEST_TOKEN_THAT_IS_NOT_SET") != std::string::npos);
  }
}

}  // TEST_SUITE
