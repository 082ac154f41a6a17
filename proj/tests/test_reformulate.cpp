#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include "caseret/error.hpp"
#include "caseret/reformulate.hpp"
#include "caseret/text.hpp"
#include "support/expect.hpp"

using namespace caseret;
using expect::error_kind;

namespace {

const std::filesystem::path kSamples = std::filesystem::path(CASERET_DATA_DIR) / "samples";

// Answers the extraction prompt with `extraction` and every other prompt with
// a summary naming the crime found in the prompt text.
class ScriptedLlm : public LlmClient {
 public:
  explicit ScriptedLlm(std::string extraction) : extraction_(std::move(extraction)) {}
  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mutex_);
    ++calls;
    if (request.system_prompt == extraction_prompt()) return extraction_;
    if (request.system_prompt == naive_summary_prompt()) return "The defendant did something.";
    return "Cause: a dispute.\nProcedure: events in " + request.case_id + ".\nOutcome: sentenced.";
  }
  int calls = 0;

 private:
  std::string extraction_;
  std::mutex mutex_;
};

LegalCase make_case(const std::string& id, const std::string& fact) {
  return LegalCase{id, CaseKind::Document, {{Section::Fact, fact}}, std::nullopt};
}

struct Fixture {
  ArticleStore store = load_article_store(kSamples / "articles.json");
  CrimeArticleMap map = load_crime_map(kSamples / "crime_map.json");
};

const std::string kArt114 = "Article 114 of the Criminal Law of the People's Republic of China";
const std::string kArt115 = "Article 115 of the Criminal Law of the People's Republic of China";
const std::string kArt67 = "Paragraph 1 of Article 67 of the Criminal Law of the People's Republic of China";

std::string words(int n, const std::string& w = "w") {
  std::string s;
  for (int i = 0; i < n; ++i) s += w + std::to_string(i) + " ";
  return s;
}

}  // namespace

TEST_CASE("parse_extraction dedupes and trims") {
  const auto e = parse_extraction("A; A\nArt.1");
  CHECK(e.crimes == std::vector<std::string>{"A"});
  CHECK(e.article_titles == std::vector<std::string>{"Art.1"});
  const auto f = parse_extraction("  x ;; y ; x \n\n a;b ;a\n");
  CHECK(f.crimes == std::vector<std::string>{"x", "y"});
  CHECK(f.article_titles == std::vector<std::string>{"a", "b"});
}

TEST_CASE("parse_extraction rejects a one-line response and keeps the raw text") {
  try {
    parse_extraction("only crimes");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
    CHECK(e.payload() == "only crimes");
    CHECK_FALSE(e.retryable());
  }
  CHECK(error_kind([] { parse_extraction("a\nb\nc"); }) == ErrorKind::Format);
  CHECK(error_kind([] { parse_extraction(";\nb"); }) == ErrorKind::Format);
}

TEST_CASE("expand_and_map intersects with the extracted articles") {
  Fixture f;
  Warnings w;
  const auto pairs = expand_and_map({"the crime of arson"}, {kArt114, kArt67}, f.store, f.map, &w);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].crime == "the crime of arson");
  REQUIRE(pairs[0].articles.size() == 1);
  CHECK(pairs[0].articles[0].article_id == kArt114);
}

TEST_CASE("expand_and_map falls back to the mapped articles") {
  Fixture f;
  const auto pairs = expand_and_map({"The Crime of Arson"}, {kArt67}, f.store, f.map);
  REQUIRE(pairs.size() == 1);
  REQUIRE(pairs[0].articles.size() == 2);
  CHECK(pairs[0].articles[0].article_id == kArt114);
  CHECK(pairs[0].articles[1].article_id == kArt115);
}

TEST_CASE("expand_and_map drops unknown crimes and titles with warnings") {
  Fixture f;
  Warnings w;
  CHECK(error_kind([&] { expand_and_map({"unknown-crime"}, {kArt114}, f.store, f.map, &w); }) ==
        ErrorKind::EmptyResult);
  CHECK_FALSE(w.empty());

  w.clear();
  const auto pairs = expand_and_map({"unknown-crime", "the crime of arson"}, {"Article 9999"}, f.store, f.map, &w);
  CHECK(pairs.size() == 1);
  CHECK(w.size() == 2);
}

TEST_CASE("crime map validation against the store") {
  Fixture f;
  CHECK_NOTHROW(f.map.validate(f.store));
  CrimeArticleMap bad;
  bad.add("x", {"Article 1 of nothing"});
  CHECK(error_kind([&] { bad.validate(f.store); }) == ErrorKind::Integrity);
}

TEST_CASE("parse_summary reads labeled parts") {
  const auto sf = parse_summary("Cause: one.\nProcedure: two\nthree.\n- Outcome\xEF\xBC\x9A four.", "arson", "c");
  CHECK(sf.cause == "one.");
  CHECK(sf.procedure == "two three.");
  CHECK(sf.outcome == "four.");
  CHECK(sf.crime == "arson");
  CHECK(sf.source_case_id == "c");
}

TEST_CASE("parse_summary puts a bare paragraph in procedure") {
  const auto sf = parse_summary("Something happened.\nThen more.", "c", "id");
  CHECK(sf.cause.empty());
  CHECK(sf.procedure == "Something happened. Then more.");
}

TEST_CASE("parse_summary truncates long parts with a warning") {
  Warnings w;
  const auto sf = parse_summary("Cause: " + words(120) + "\nOutcome: done", "c", "id", &w);
  CHECK(text::word_count(sf.cause) == 100);
  CHECK(w.size() == 1);
  CHECK(sf.outcome == "done");
}

TEST_CASE("parse_summary rejects empty responses") {
  CHECK(error_kind([] { parse_summary("", "c", "id"); }) == ErrorKind::Format);
  CHECK(error_kind([] { parse_summary("  \n ", "c", "id"); }) == ErrorKind::Format);
  CHECK(error_kind([] { parse_summary("Cause:\nOutcome:", "c", "id"); }) == ErrorKind::Format);
}

TEST_CASE("summarization prompt fills the crime and article slots") {
  const auto p = summarization_prompt({"the crime of arson", {{kArt114, "provision text"}}});
  CHECK(p.find("the crime of arson") != std::string::npos);
  CHECK(p.find("provision text") != std::string::npos);
}

TEST_CASE("reformulate_case caps at four sub-facts") {
  ArticleStore store;
  CrimeArticleMap map;
  std::string crimes;
  for (int k = 0; k < 5; ++k) {
    store.add({"Art." + std::to_string(k), "text " + std::to_string(k)});
    map.add("crime " + std::to_string(k), {"Art." + std::to_string(k)});
    crimes += (k ? ";" : "") + std::string("crime ") + std::to_string(k);
  }
  ScriptedLlm llm(crimes + "\nArt.0");
  Warnings w;
  const auto rc = reformulate_case(make_case("c", "fact"), llm, store, map, ReformulationMode::KGCR, &w);
  REQUIRE(rc.subfacts.size() == 4);
  CHECK(rc.subfacts[3].crime == "crime 3");
  CHECK(llm.calls == 5);
  CHECK_NOTHROW(rc.validate());
}

TEST_CASE("reformulate_case falls back to the fact section") {
  Fixture f;
  ScriptedLlm llm("unknown-crime\nArticle 1");
  const auto rc = reformulate_case(make_case("c", words(130)), llm, f.store, f.map, ReformulationMode::KGCR);
  REQUIRE(rc.subfacts.size() == 1);
  CHECK(rc.subfacts[0].crime == "fact");
  CHECK(text::word_count(rc.subfacts[0].procedure) == 100);
}

TEST_CASE("NS mode wraps one summary") {
  Fixture f;
  ScriptedLlm llm("unused");
  const auto rc = reformulate_case(make_case("c", "fact"), llm, f.store, f.map, ReformulationMode::NS);
  REQUIRE(rc.subfacts.size() == 1);
  CHECK(rc.subfacts[0].crime == "summary");
  CHECK(llm.calls == 1);
}

TEST_CASE("sub-fact and case invariants") {
  CHECK(error_kind([] { SubFact{"", "a", "", "", "c"}.validate(); }) == ErrorKind::Integrity);
  CHECK(error_kind([] { SubFact{"x", "", "", "", "c"}.validate(); }) == ErrorKind::Integrity);
  CHECK(error_kind([] { ReformulatedCase{"c", {}}.validate(); }) == ErrorKind::Integrity);
  CHECK(error_kind([] {
          ReformulatedCase{"c", {{"x", "a", "", "", "c"}, {"X", "b", "", "", "c"}}}.validate();
        }) == ErrorKind::Integrity);
}

TEST_CASE("sample cases under the mock client are deterministic") {
  Fixture f;
  const auto corpus = load_corpus(kSamples / "corpus.jsonl");
  auto a = MockLlmClient::from_directory(kSamples / "fixtures");
  auto b = MockLlmClient::from_directory(kSamples / "fixtures");
  const auto& drug = corpus.at("drug-case");
  const auto ra = reformulate_case(drug, a, f.store, f.map, ReformulationMode::KGCR);
  const auto rb = reformulate_case(drug, b, f.store, f.map, ReformulationMode::KGCR);
  CHECK(ra == rb);
  REQUIRE(ra.subfacts.size() == 3);
  CHECK(ra.subfacts[0].crime == "the crime of transporting drugs");

  const auto arson = reformulate_case(corpus.at("arson-case"), a, f.store, f.map, ReformulationMode::KGCR);
  REQUIRE(arson.subfacts.size() == 1);
  CHECK(arson.subfacts[0].crime == "the crime of arson");
  CHECK(arson.subfacts[0].cause.rfind("Zhao waited until Liu was away", 0) == 0);
}

TEST_CASE("cache persists entries and serves hits") {
  const auto dir = std::filesystem::temp_directory_path() / "caseret_test_cache";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = dir / "cache.jsonl";
  Fixture f;
  const LegalCase c1 = make_case("c1", "fact one");
  const LegalCase c2 = make_case("c2", "fact two");
  const std::vector<const LegalCase*> cases{&c1, &c2};
  ScriptedLlm llm("the crime of arson\n" + kArt114);
  {
    ReformulationCache cache(path);
    ReformulateSummary summary;
    const auto out = reformulate_all(cases, llm, f.store, f.map, cache, {}, &summary);
    CHECK(out.size() == 2);
    CHECK(out[1].case_id == "c2");
    CHECK(summary.reformulated == 2);
    CHECK(summary.cache_hits == 0);
  }
  CHECK(llm.calls == 4);
  ReformulationCache reopened(path);
  CHECK(reopened.size() == 2);
  CHECK_FALSE(reopened.find("c1", ReformulationMode::NS).has_value());
  ReformulateSummary summary;
  const auto again = reformulate_all(cases, llm, f.store, f.map, reopened, {}, &summary);
  CHECK(llm.calls == 4);
  CHECK(summary.cache_hits == 2);
  CHECK(again[0] == *reopened.find("c1", ReformulationMode::KGCR));
  std::filesystem::remove_all(dir);
}

TEST_CASE("reformulate_all finishes other cases and rethrows the first failure") {
  Fixture f;
  const LegalCase good = make_case("good", "fact");
  const LegalCase bad = make_case("bad", "fact");
  class Failing : public ScriptedLlm {
   public:
    Failing() : ScriptedLlm("the crime of arson\n" + kArt114) {}
    std::string complete(const ChatRequest& r) override {
      if (r.case_id == "bad") throw Error(ErrorKind::Transport, "down", true);
      return ScriptedLlm::complete(r);
    }
  } llm;
  ReformulationCache cache;
  CHECK(error_kind([&] {
          reformulate_all({&bad, &good}, llm, f.store, f.map, cache, {ReformulationMode::KGCR, 2});
        }) == ErrorKind::Transport);
  CHECK(cache.find("good", ReformulationMode::KGCR).has_value());
}
