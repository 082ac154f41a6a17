#include "caseret/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/io.hpp"
#include "caseret/text.hpp"

namespace caseret {

void sort_ranking(std::vector<ScoredDoc>& ranking) {
  std::sort(ranking.begin(), ranking.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
}

void RankedRun::validate() const {
  for (const auto& [qid, ranking] : queries) {
    std::set<std::string_view> seen;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      if (!seen.insert(ranking[r].doc_id).second)
        fail(ErrorKind::Integrity, "run ranks doc " + ranking[r].doc_id + " twice for query " + qid);
      if (r > 0 && ranking[r].score > ranking[r - 1].score)
        fail(ErrorKind::Integrity, "run scores increase at rank " + std::to_string(r + 1) + " for query " + qid);
    }
  }
}

std::vector<std::string> doc_ids(std::span<const ScoredDoc> ranking) {
  std::vector<std::string> out;
  out.reserve(ranking.size());
  for (const auto& d : ranking) out.push_back(d.doc_id);
  return out;
}

double precision_at_k(std::span<const std::string> ranking, const std::set<std::string>& positives, std::size_t k,
                      std::string* warning) {
  if (k == 0) fail(ErrorKind::Contract, "precision cutoff must be at least 1");
  if (ranking.empty()) {
    if (warning) *warning = "empty ranking";
    return 0.0;
  }
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) hits += positives.count(ranking[r]);
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> average_precision(std::span<const std::string> ranking, const std::set<std::string>& positives) {
  if (positives.empty()) return std::nullopt;
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (!positives.count(ranking[r])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(positives.size());
}

double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& grades, std::size_t k) {
  if (k == 0) fail(ErrorKind::Contract, "NDCG cutoff must be at least 1");
  auto discount = [](std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); };
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
    const auto it = grades.find(ranking[r]);
    if (it != grades.end()) dcg += it->second / discount(r + 1);
  }
  std::vector<int> ideal;
  for (const auto& [_, g] : grades) ideal.push_back(g);
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r) idcg += ideal[r] / discount(r + 1);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

MetricReport evaluate_run(const RankedRun& run, const Judgments& judgments, const std::vector<CandidatePool>& pools,
                          const std::map<std::string, QueryType>& query_types, const EvalOptions& options) {
  run.validate();
  std::map<std::string, const CandidatePool*> by_query;
  for (const auto& p : pools) by_query[p.query_id] = &p;
  for (const auto& [qid, _] : run.queries)
    if (!by_query.count(qid)) fail(ErrorKind::Integrity, "run has query " + qid + " with no candidate pool");

  MetricReport report;
  report.tag = run.tag;
  std::map<std::string, std::vector<double>> all;
  std::map<QueryType, std::map<std::string, std::vector<double>>> typed;

  for (const auto& [qid, pool] : by_query) {
    const auto it = run.queries.find(qid);
    if (it == run.queries.end()) fail(ErrorKind::Integrity, "run is missing pooled query " + qid);
    const auto ranking = doc_ids(it->second);
    const std::set<std::string> pooled(pool->candidate_ids.begin(), pool->candidate_ids.end());
    const std::set<std::string> ranked(ranking.begin(), ranking.end());
    if (pooled != ranked) fail(ErrorKind::Integrity, "run docs for query " + qid + " differ from its pool");

    std::set<std::string> positives;
    std::map<std::string, int> grades;
    for (const auto& id : pool->candidate_ids) {
      const int g = judgments.grade_or_zero(qid, id);
      grades[id] = g;
      if (binarize_grade(g, options.rule)) positives.insert(id);
    }

    QueryMetrics m;
    m.query_id = qid;
    const auto type_it = query_types.find(qid);
    m.query_type = type_it == query_types.end() ? QueryType::Common : type_it->second;
    m.average_precision = average_precision(ranking, positives);
    if (!m.average_precision) report.warnings.push_back("query " + qid + " has no positives; excluded from MAP");
    for (auto k : options.precision_ks) {
      std::string warning;
      m.values["P@" + std::to_string(k)] = precision_at_k(ranking, positives, k, &warning);
      if (!warning.empty()) report.warnings.push_back("query " + qid + ": " + warning);
    }
    for (auto k : options.ndcg_ks) m.values["NDCG@" + std::to_string(k)] = ndcg_at_k(ranking, grades, k);

    auto add = [&](const std::string& name, double v) {
      all[name].push_back(v);
      typed[m.query_type][name].push_back(v);
    };
    if (m.average_precision) add("MAP", *m.average_precision);
    for (const auto& [name, v] : m.values) add(name, v);
    report.per_query.push_back(std::move(m));
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (const auto& [name, v] : all) report.macro[name] = mean(v);
  for (const auto& [type, metrics] : typed)
    for (const auto& [name, v] : metrics) report.by_type[type][name] = mean(v);
  return report;
}

nlohmann::json metric_report_to_json(const MetricReport& report) {
  nlohmann::json per_query = nlohmann::json::array();
  for (const auto& q : report.per_query) {
    nlohmann::json values(q.values);
    values["AP"] = q.average_precision ? nlohmann::json(*q.average_precision) : nlohmann::json(nullptr);
    per_query.push_back({{"query_id", q.query_id}, {"query_type", to_string(q.query_type)}, {"metrics", values}});
  }
  nlohmann::json by_type = nlohmann::json::object();
  for (const auto& [type, metrics] : report.by_type) by_type[std::string(to_string(type))] = metrics;
  return {{"tag", report.tag},
          {"aggregate", report.macro},
          {"by_query_type", by_type},
          {"per_query", per_query},
          {"warnings", report.warnings}};
}

std::string metric_report_to_csv(const MetricReport& report) {
  std::string out = "query_id,query_type,metric,value\n";
  auto row = [&](const std::string& q, std::string_view type, const std::string& metric, double v) {
    out += q + "," + std::string(type) + "," + metric + "," + io::format_double(v) + "\n";
  };
  for (const auto& q : report.per_query) {
    if (q.average_precision) row(q.query_id, to_string(q.query_type), "AP", *q.average_precision);
    for (const auto& [name, v] : q.values) row(q.query_id, to_string(q.query_type), name, v);
  }
  for (const auto& [type, metrics] : report.by_type)
    for (const auto& [name, v] : metrics) row(std::string(to_string(type)), to_string(type), name, v);
  for (const auto& [name, v] : report.macro) row("all", "all", name, v);
  return out;
}

std::string serialize_trec_run(const RankedRun& run, const std::string& header_comment) {
  if (run.tag.empty() || run.tag.find_first_of(" \t\n") != std::string::npos)
    fail(ErrorKind::Contract, "run tag must be a single non-empty token");
  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  for (const auto& [qid, ranking] : run.queries)
    for (std::size_t r = 0; r < ranking.size(); ++r)
      out += qid + " Q0 " + ranking[r].doc_id + " " + std::to_string(r + 1) + " " +
             io::format_double(ranking[r].score) + " " + run.tag + "\n";
  return out;
}

RankedRun parse_trec_run(std::istream& in) {
  RankedRun run;
  std::map<std::string, std::vector<std::pair<std::size_t, ScoredDoc>>> rows;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    std::istringstream fields(trimmed);
    std::string qid, q0, doc, tag, extra;
    std::size_t rank = 0;
    std::string score_text;
    if (!(fields >> qid >> q0 >> doc >> rank >> score_text >> tag) || (fields >> extra) || q0 != "Q0")
      fail(ErrorKind::Parse, "run line " + std::to_string(number) + ": expected six columns");
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(score_text, &used);
      if (used != score_text.size()) throw std::invalid_argument(score_text);
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, "run line " + std::to_string(number) + ": bad score " + score_text);
    }
    if (run.tag.empty()) run.tag = tag;
    if (tag != run.tag) fail(ErrorKind::Parse, "run line " + std::to_string(number) + ": mixed run tags");
    rows[qid].push_back({rank, {doc, score}});
  }
  for (auto& [qid, entries] : rows) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    auto& ranking = run.queries[qid];
    for (std::size_t r = 0; r < entries.size(); ++r) {
      if (entries[r].first != r + 1) fail(ErrorKind::Parse, "ranks for query " + qid + " are not 1..n");
      ranking.push_back(std::move(entries[r].second));
    }
  }
  run.validate();
  return run;
}

RankedRun load_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return parse_trec_run(in);
}

}  // namespace caseret
