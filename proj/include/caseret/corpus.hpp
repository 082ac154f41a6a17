#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace caseret {

enum class CaseKind { Query, Document };
enum class Section { Procedure, Fact, Reasoning, Decision, Tail };
enum class QueryType { Common, Controversial };

// Relevance binarization rule of the two benchmark families.
enum class GradeRule { LeCaRD, LeCaRDv2 };

std::string_view to_string(CaseKind kind);
std::string_view to_string(Section section);
std::string_view to_string(QueryType type);
std::string_view to_string(GradeRule rule);
std::optional<CaseKind> parse_case_kind(std::string_view s);
std::optional<Section> parse_section(std::string_view s);
std::optional<QueryType> parse_query_type(std::string_view s);
std::optional<GradeRule> parse_grade_rule(std::string_view s);

struct LegalCase {
  std::string id;
  CaseKind kind = CaseKind::Document;
  // Sections that are not present in the source are absent from the map.
  std::map<Section, std::string> sections;
  std::optional<QueryType> query_type;

  const std::string& fact() const;
  const std::string* section(Section s) const;
  QueryType effective_query_type() const { return query_type.value_or(QueryType::Common); }
  // Sections in canonical order, blank-line separated.
  std::string full_text() const;

  // Throws Integrity on a violated case invariant.
  void validate() const;

  bool operator==(const LegalCase&) const = default;
};

// Immutable once constructed.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<LegalCase> cases);

  const std::vector<LegalCase>& cases() const { return cases_; }
  std::size_t size() const { return cases_.size(); }
  const LegalCase* find(std::string_view id) const;
  const LegalCase& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

 private:
  std::vector<LegalCase> cases_;
  std::unordered_map<std::string, std::size_t> index_;
};

Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

struct RelevanceJudgment {
  std::string query_id;
  std::string doc_id;
  int grade = 0;
};

bool binarize_grade(int grade, GradeRule rule);

class Judgments {
 public:
  Judgments() = default;
  explicit Judgments(const std::vector<RelevanceJudgment>& judgments);

  std::optional<int> grade(std::string_view query_id, std::string_view doc_id) const;
  // Unjudged pairs are grade 0.
  int grade_or_zero(std::string_view query_id, std::string_view doc_id) const;
  bool is_positive(std::string_view query_id, std::string_view doc_id, GradeRule rule) const;
  // Judged docs for a query, ordered by doc id.
  const std::map<std::string, int>& for_query(std::string_view query_id) const;
  std::vector<std::string> query_ids() const;
  std::size_t size() const { return count_; }

 private:
  std::map<std::string, std::map<std::string, int>, std::less<>> by_query_;
  std::size_t count_ = 0;
};

Judgments parse_judgments(std::istream& in);
Judgments load_judgments(const std::filesystem::path& path);

struct CandidatePool {
  std::string query_id;
  std::vector<std::string> candidate_ids;

  bool operator==(const CandidatePool&) const = default;
};

// Checks no duplicates and, when a corpus is given, that every id resolves.
void validate_pool(const CandidatePool& pool, const Corpus* corpus = nullptr);

std::vector<CandidatePool> parse_pools(std::istream& in);
std::vector<CandidatePool> load_pools(const std::filesystem::path& path);
std::string serialize_pools(const std::vector<CandidatePool>& pools);

inline constexpr std::size_t kSupplementCount = 10;
inline constexpr std::size_t kSupplementFirstRank = 101;
inline constexpr std::size_t kSupplementLastRank = 150;

// When every pooled candidate is positive under `rule`, appends ten documents
// sampled without replacement from BM25 ranks 101-150 (1-based), skipping docs
// already pooled or judged positive. Otherwise returns the pool unchanged.
CandidatePool supplement_pool(const CandidatePool& pool, const Judgments& judgments, GradeRule rule,
                              const std::vector<std::string>& bm25_ranking, std::uint64_t seed);

}  // namespace caseret
