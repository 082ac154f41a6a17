#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caseret/eval.hpp"
#include "caseret/rng.hpp"
#include "support/expect.hpp"
#include "support/oracles.hpp"

using namespace caseret;
using expect::error_kind;

namespace {

using Ids = std::vector<std::string>;

RankedRun run_from(const std::map<std::string, Ids>& orders) {
  RankedRun run{"test", {}};
  for (const auto& [q, ids] : orders)
    for (std::size_t r = 0; r < ids.size(); ++r)
      run.queries[q].push_back({ids[r], static_cast<double>(ids.size() - r)});
  return run;
}

}  // namespace

TEST_CASE("precision at k") {
  const Ids r{"a", "b", "c", "d"};
  CHECK(precision_at_k(r, {"a", "c"}, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(precision_at_k(r, {}, 3) == 0.0);
  CHECK(precision_at_k(r, {"a", "b", "c"}, 3) == 1.0);
  CHECK(precision_at_k(r, {"a"}, 10) == 0.1);
  std::string warning;
  CHECK(precision_at_k({}, {"a"}, 3, &warning) == 0.0);
  CHECK_FALSE(warning.empty());
  CHECK(error_kind([&] { precision_at_k(r, {"a"}, 0); }) == ErrorKind::Contract);
}

TEST_CASE("average precision") {
  CHECK(average_precision(Ids{"a", "b"}, {"a"}) == 1.0);
  CHECK(average_precision(Ids{"b", "a"}, {"a"}) == 0.5);
  CHECK_FALSE(average_precision(Ids{"a"}, {}).has_value());
  // Positive missing from the ranking still counts in the denominator.
  CHECK(average_precision(Ids{"a", "b"}, {"a", "z"}) == 0.5);
}

TEST_CASE("average precision over every ordering of six documents") {
  Ids docs{"d1", "d2", "d3", "d4", "d5", "d6"};
  const std::set<std::string> relevant{"d2", "d4", "d5"};
  std::size_t orderings = 0;
  do {
    // Exhaustive definition: mean of precision at each relevant rank.
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < docs.size(); ++r)
      if (relevant.contains(docs[r])) sum += static_cast<double>(++hits) / static_cast<double>(r + 1);
    CHECK(average_precision(docs, relevant) == sum / 3.0);
    CHECK(average_precision(docs, relevant) == oracle::average_precision(docs, relevant));
    ++orderings;
  } while (std::next_permutation(docs.begin(), docs.end()));
  CHECK(orderings == 720);
}

TEST_CASE("NDCG") {
  CHECK(ndcg_at_k(Ids{"a", "b", "c"}, {{"a", 3}}, 3) == 1.0);
  CHECK(ndcg_at_k(Ids{"g0", "g3"}, {{"g0", 0}, {"g3", 3}}, 2) == doctest::Approx(0.6309297535714574).epsilon(1e-15));
  CHECK(ndcg_at_k(Ids{"a", "b"}, {}, 3) == 0.0);
  CHECK(ndcg_at_k(Ids{"a", "b"}, {{"x", 2}}, 3) == 0.0);
  CHECK(error_kind([] { ndcg_at_k(Ids{"a"}, {}, 0); }) == ErrorKind::Contract);
}

TEST_CASE("metric invariants on random rankings") {
  Rng rng(31);
  for (int t = 0; t < 300; ++t) {
    Ids docs;
    std::map<std::string, int> grades;
    std::set<std::string> positives;
    const std::size_t n = 2 + rng.below(10);
    for (std::size_t d = 0; d < n; ++d) {
      docs.push_back("d" + std::to_string(d));
      grades[docs.back()] = static_cast<int>(rng.below(4));
      if (grades[docs.back()] == 3) positives.insert(docs.back());
    }
    for (std::size_t i = n - 1; i > 0; --i) std::swap(docs[i], docs[rng.below(i + 1)]);
    const std::size_t k = 1 + rng.below(n);

    const double p = precision_at_k(docs, positives, k);
    const double g = ndcg_at_k(docs, grades, k);
    const auto ap = average_precision(docs, positives);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0 + 1e-15);
    if (ap) {
      CHECK(*ap >= 0.0);
      CHECK(*ap <= 1.0);
    }
    CHECK(p == oracle::precision(docs, positives, k));
    CHECK(g == doctest::Approx(oracle::ndcg(docs, grades, k)).epsilon(1e-12));

    // Moving a positive up one place never hurts.
    for (std::size_t r = 1; r < n; ++r) {
      if (!positives.contains(docs[r]) || positives.contains(docs[r - 1])) continue;
      auto swapped = docs;
      std::swap(swapped[r], swapped[r - 1]);
      CHECK(precision_at_k(swapped, positives, k) >= p);
      CHECK(*average_precision(swapped, positives) >= *ap);
      if (grades[docs[r]] >= grades[docs[r - 1]]) CHECK(ndcg_at_k(swapped, grades, k) >= g - 1e-15);
      break;
    }
  }
}

TEST_CASE("NDCG depends only on the ordering") {
  std::vector<ScoredDoc> a{{"x", 0.9}, {"y", 0.5}, {"z", 0.1}};
  auto b = a;
  for (auto& d : b) d.score = 3.0 * d.score + 7.0;
  sort_ranking(a);
  sort_ranking(b);
  const std::map<std::string, int> grades{{"x", 1}, {"z", 3}};
  CHECK(ndcg_at_k(doc_ids(a), grades, 3) == ndcg_at_k(doc_ids(b), grades, 3));
}

TEST_CASE("sort_ranking breaks ties by doc id") {
  std::vector<ScoredDoc> r{{"b", 1.0}, {"c", 2.0}, {"a", 1.0}};
  sort_ranking(r);
  CHECK(doc_ids(r) == Ids{"c", "a", "b"});
}

TEST_CASE("evaluate_run on an ideal run and a single query") {
  const Judgments j({{"q1", "a", 3}, {"q1", "b", 2}, {"q1", "c", 0}});
  const std::vector<CandidatePool> pools{{"q1", {"a", "b", "c"}}};
  const auto report = evaluate_run(run_from({{"q1", {"a", "b", "c"}}}), j, pools, {{"q1", QueryType::Controversial}});
  REQUIRE(report.per_query.size() == 1);
  for (const auto& key : {"NDCG@3", "NDCG@5", "NDCG@10"}) CHECK(report.macro.at(key) == 1.0);
  CHECK(report.macro.at("MAP") == 1.0);
  CHECK(report.macro.at("P@3") == report.per_query[0].values.at("P@3"));
  CHECK(report.by_type.at(QueryType::Controversial).at("P@3") == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(report.by_type.contains(QueryType::Common));
}

TEST_CASE("evaluate_run macro averages are permutation-invariant and skip queries without positives") {
  const Judgments j({{"q1", "a", 3}, {"q2", "c", 1}, {"q3", "e", 3}});
  const std::vector<CandidatePool> pools{{"q1", {"a", "b"}}, {"q2", {"c", "d"}}, {"q3", {"e", "f"}}};
  const auto run = run_from({{"q1", {"b", "a"}}, {"q2", {"c", "d"}}, {"q3", {"e", "f"}}});
  const auto report = evaluate_run(run, j, pools, {});
  CHECK(report.macro.at("MAP") == doctest::Approx(0.75));
  CHECK_FALSE(report.per_query[1].average_precision.has_value());
  CHECK_FALSE(report.warnings.empty());
  const std::vector<CandidatePool> reversed{pools[2], pools[0], pools[1]};
  CHECK(evaluate_run(run, j, reversed, {}).macro == report.macro);
}

TEST_CASE("evaluate_run matches the oracle on a random 20-query set") {
  Rng rng(20);
  std::vector<RelevanceJudgment> judged;
  std::vector<CandidatePool> pools;
  std::map<std::string, Ids> orders;
  std::map<std::string, QueryType> types;
  for (int q = 0; q < 20; ++q) {
    const auto qid = "q" + std::to_string(q);
    CandidatePool pool{qid, {}};
    for (int d = 0; d < 12; ++d) {
      const auto did = qid + "d" + std::to_string(d);
      pool.candidate_ids.push_back(did);
      if (d == 0)
        judged.push_back({qid, did, 3});
      else if (rng.below(3))
        judged.push_back({qid, did, static_cast<int>(rng.below(4))});
    }
    auto order = pool.candidate_ids;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    orders[qid] = order;
    types[qid] = q % 3 ? QueryType::Common : QueryType::Controversial;
    pools.push_back(pool);
  }
  const Judgments j(judged);
  const auto report = evaluate_run(run_from(orders), j, pools, types);

  double map_sum = 0.0, p3 = 0.0, n10 = 0.0, n10_controversial = 0.0;
  int controversial = 0;
  for (const auto& [qid, order] : orders) {
    std::map<std::string, int> grades;
    std::set<std::string> positives;
    for (const auto& d : order) {
      grades[d] = j.grade_or_zero(qid, d);
      if (grades[d] == 3) positives.insert(d);
    }
    map_sum += *oracle::average_precision(order, positives);
    p3 += oracle::precision(order, positives, 3);
    const double n = oracle::ndcg(order, grades, 10);
    n10 += n;
    if (types[qid] == QueryType::Controversial) {
      n10_controversial += n;
      ++controversial;
    }
  }
  CHECK(report.macro.at("MAP") == doctest::Approx(map_sum / 20).epsilon(1e-12));
  CHECK(report.macro.at("P@3") == doctest::Approx(p3 / 20).epsilon(1e-12));
  CHECK(report.macro.at("NDCG@10") == doctest::Approx(n10 / 20).epsilon(1e-12));
  CHECK(report.by_type.at(QueryType::Controversial).at("NDCG@10") ==
        doctest::Approx(n10_controversial / controversial).epsilon(1e-12));
}

TEST_CASE("evaluate_run consistency errors") {
  const Judgments j({{"q1", "a", 3}});
  const std::vector<CandidatePool> pools{{"q1", {"a", "b"}}};
  CHECK(error_kind([&] { evaluate_run(run_from({{"q1", {"a", "b"}}, {"q9", {"a"}}}), j, pools, {}); }) ==
        ErrorKind::Integrity);
  CHECK(error_kind([&] { evaluate_run(run_from({}), j, pools, {}); }) == ErrorKind::Integrity);
  CHECK(error_kind([&] { evaluate_run(run_from({{"q1", {"a"}}}), j, pools, {}); }) == ErrorKind::Integrity);
  CHECK(error_kind([&] { evaluate_run(run_from({{"q1", {"a", "x"}}}), j, pools, {}); }) == ErrorKind::Integrity);
}

TEST_CASE("run validation") {
  RankedRun bad{"t", {{"q", {{"a", 0.1}, {"b", 0.5}}}}};
  CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::Integrity);
  RankedRun dup{"t", {{"q", {{"a", 0.5}, {"a", 0.1}}}}};
  CHECK(error_kind([&] { dup.validate(); }) == ErrorKind::Integrity);
}

TEST_CASE("TREC run files round-trip exactly") {
  RankedRun run{"sys", {{"q1", {{"d1", 0.1 + 0.2}, {"d2", -1e-17}}}, {"q2", {{"d3", 1.0 / 3.0}}}}};
  const auto text = serialize_trec_run(run, "caseret run seed=7");
  CHECK(text.rfind("# caseret run seed=7\n", 0) == 0);
  CHECK(text.find("q1 Q0 d1 1 ") != std::string::npos);
  CHECK(text.find(" sys\n") != std::string::npos);
  std::istringstream in(text);
  CHECK(parse_trec_run(in) == run);

  std::istringstream bad("q1 Q0 d1 one 0.5 sys\n");
  CHECK(error_kind([&] { parse_trec_run(bad); }) == ErrorKind::Parse);
  std::istringstream short_line("q1 Q0 d1 1 0.5\n");
  CHECK(error_kind([&] { parse_trec_run(short_line); }) == ErrorKind::Parse);
}

TEST_CASE("report exports") {
  const Judgments j({{"q1", "a", 3}});
  const std::vector<CandidatePool> pools{{"q1", {"a", "b"}}};
  const auto report = evaluate_run(run_from({{"q1", {"a", "b"}}}), j, pools, {{"q1", QueryType::Common}});
  const auto json = metric_report_to_json(report);
  CHECK(json["tag"] == "test");
  CHECK(json["aggregate"]["MAP"] == 1.0);
  CHECK(json["per_query"].size() == 1);
  const auto csv = metric_report_to_csv(report);
  CHECK(csv.rfind("query_id,query_type,metric,value\n", 0) == 0);
  CHECK(csv.find("q1,common,AP,1") != std::string::npos);
  CHECK(csv.find("all,all,MAP,1") != std::string::npos);
}
