#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "caseret/corpus.hpp"

namespace caseret {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
  bool operator==(const ScoredDoc&) const = default;
};

// Descending score, ascending doc id on ties.
void sort_ranking(std::vector<ScoredDoc>& ranking);

struct RankedRun {
  std::string tag;
  std::map<std::string, std::vector<ScoredDoc>> queries;

  // Throws Integrity when scores increase or a doc repeats within a query.
  void validate() const;
  bool operator==(const RankedRun&) const = default;
};

std::vector<std::string> doc_ids(std::span<const ScoredDoc> ranking);

// An empty ranking scores 0 and, when `warning` is given, sets it.
double precision_at_k(std::span<const std::string> ranking, const std::set<std::string>& positives, std::size_t k,
                      std::string* warning = nullptr);

// Precision at each relevant rank, summed and divided by |positives|.
// nullopt when there are no positives.
std::optional<double> average_precision(std::span<const std::string> ranking, const std::set<std::string>& positives);

// Linear gain, log2(rank + 1) discount. Docs missing from `grades` are grade 0;
// the ideal ordering is built from `grades`.
double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& grades, std::size_t k);

struct EvalOptions {
  GradeRule rule = GradeRule::LeCaRD;
  std::vector<std::size_t> precision_ks{3};
  std::vector<std::size_t> ndcg_ks{3, 5, 10};
};

struct QueryMetrics {
  std::string query_id;
  QueryType query_type = QueryType::Common;
  std::optional<double> average_precision;
  std::map<std::string, double> values;  // "P@3", "NDCG@10", ...
};

struct MetricReport {
  std::string tag;
  std::vector<QueryMetrics> per_query;  // ordered by query id
  std::map<std::string, double> macro;  // includes "MAP" over queries with positives
  std::map<QueryType, std::map<std::string, double>> by_type;
  std::vector<std::string> warnings;
};

// Every pooled query must appear in the run with exactly its pooled docs.
// Unjudged pooled docs are grade 0.
MetricReport evaluate_run(const RankedRun& run, const Judgments& judgments, const std::vector<CandidatePool>& pools,
                          const std::map<std::string, QueryType>& query_types, const EvalOptions& options = {});

nlohmann::json metric_report_to_json(const MetricReport& report);
// query_id,query_type,metric,value; aggregate rows use query_id "all" or the type name.
std::string metric_report_to_csv(const MetricReport& report);

// "query_id Q0 doc_id rank score tag" lines, queries by id. Leading "#" lines
// are comments.
std::string serialize_trec_run(const RankedRun& run, const std::string& header_comment = {});
RankedRun parse_trec_run(std::istream& in);
RankedRun load_trec_run(const std::filesystem::path& path);

}  // namespace caseret
