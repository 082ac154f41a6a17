#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "caseret/corpus.hpp"
#include "caseret/llm.hpp"

namespace caseret {

using Warnings = std::vector<std::string>;

inline constexpr std::size_t kMaxSubfacts = 4;
inline constexpr std::size_t kMaxPartWords = 100;

struct LawArticle {
  std::string article_id;
  std::string provision;

  bool operator==(const LawArticle&) const = default;
};

// article_id -> provision text. Lookups match on the normalized id.
class ArticleStore {
 public:
  ArticleStore() = default;
  void add(LawArticle article);
  const LawArticle* find(std::string_view title) const;
  std::size_t size() const { return articles_.size(); }

 private:
  std::map<std::string, LawArticle, std::less<>> articles_;
};

ArticleStore load_article_store(const std::filesystem::path& path);
ArticleStore parse_article_store(std::string_view json_text);

// Expert mapping from a crime to the articles that define it.
class CrimeArticleMap {
 public:
  CrimeArticleMap() = default;
  void add(std::string crime, std::vector<std::string> article_ids);
  // Canonical crime name and its article ids, matched on the normalized name.
  const std::pair<std::string, std::vector<std::string>>* find(std::string_view crime) const;
  bool contains(std::string_view crime) const { return find(crime) != nullptr; }
  // Throws Integrity if any listed article is missing from the store.
  void validate(const ArticleStore& store) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

CrimeArticleMap load_crime_map(const std::filesystem::path& path);
CrimeArticleMap parse_crime_map(std::string_view json_text);

struct CrimeArticlePair {
  std::string crime;
  std::vector<LawArticle> articles;
};

struct SubFact {
  std::string crime;
  std::string cause;
  std::string procedure;
  std::string outcome;
  std::string source_case_id;

  // Encoder input: title and the three parts, newline separated.
  std::string text() const;
  void validate() const;

  bool operator==(const SubFact&) const = default;
};

enum class ReformulationMode { KGCR, NS };
std::string_view to_string(ReformulationMode mode);
std::optional<ReformulationMode> parse_reformulation_mode(std::string_view s);

struct ReformulatedCase {
  std::string case_id;
  std::vector<SubFact> subfacts;

  void validate() const;
  bool operator==(const ReformulatedCase&) const = default;
};

std::string extraction_prompt();
std::string summarization_prompt(const CrimeArticlePair& pair);
std::string naive_summary_prompt();

struct Extraction {
  std::vector<std::string> crimes;
  std::vector<std::string> article_titles;
};

// Two non-empty lines, crimes then articles, each semicolon separated.
Extraction parse_extraction(std::string_view response);
Extraction extract_crimes_articles(const LegalCase& legal_case, LlmClient& llm);

// Throws EmptyResult when no crime survives the mapping.
std::vector<CrimeArticlePair> expand_and_map(const std::vector<std::string>& crimes,
                                             const std::vector<std::string>& article_titles,
                                             const ArticleStore& store, const CrimeArticleMap& map,
                                             Warnings* warnings = nullptr);

// Accepts the labeled Cause:/Procedure:/Outcome: layout or a bare paragraph,
// which lands in `procedure`. Parts over 100 words are truncated.
SubFact parse_summary(std::string_view response, std::string crime, std::string case_id,
                      Warnings* warnings = nullptr);

SubFact summarize_fact(const LegalCase& legal_case, const CrimeArticlePair& pair, LlmClient& llm,
                       Warnings* warnings = nullptr);

ReformulatedCase reformulate_case(const LegalCase& legal_case, LlmClient& llm, const ArticleStore& store,
                                  const CrimeArticleMap& map, ReformulationMode mode,
                                  Warnings* warnings = nullptr);

// JSON Lines store of reformulation results keyed by (case id, mode).
// Appends are serialized; lookups are safe alongside appends.
class ReformulationCache {
 public:
  ReformulationCache() = default;
  // Loads existing entries (if the file exists) and appends new ones to it.
  explicit ReformulationCache(std::filesystem::path path);

  std::optional<ReformulatedCase> find(std::string_view case_id, ReformulationMode mode) const;
  void put(const ReformulatedCase& reformulated, ReformulationMode mode);
  std::size_t size() const;
  // All entries of one mode, keyed by case id.
  std::map<std::string, ReformulatedCase> entries(ReformulationMode mode) const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, ReformulationMode>, ReformulatedCase> entries_;
};

std::string serialize_cache_line(const ReformulatedCase& reformulated, ReformulationMode mode);

struct ReformulateOptions {
  ReformulationMode mode = ReformulationMode::KGCR;
  std::size_t max_parallel = 4;
};

struct ReformulateSummary {
  std::size_t cache_hits = 0;
  std::size_t reformulated = 0;
  Warnings warnings;
};

// Reformulates every case not already cached, running up to max_parallel
// LLM-bound cases at once. Results come back in input order. If any case
// fails, the others still complete and the first failure is rethrown.
std::vector<ReformulatedCase> reformulate_all(const std::vector<const LegalCase*>& cases, LlmClient& llm,
                                              const ArticleStore& store, const CrimeArticleMap& map,
                                              ReformulationCache& cache, const ReformulateOptions& options,
                                              ReformulateSummary* summary = nullptr);

}  // namespace caseret
