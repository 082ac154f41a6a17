#include "caseret/labeling.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/text.hpp"

namespace caseret {
namespace {

std::vector<std::string> normalized(const std::vector<std::string>& crimes) {
  if (crimes.empty()) fail(ErrorKind::Contract, "crime list is empty");
  std::vector<std::string> out;
  out.reserve(crimes.size());
  for (const auto& c : crimes) out.push_back(text::normalize_name(c));
  return out;
}

LabelMatrix blank(std::size_t rows, std::size_t cols, CaseLabel label) {
  LabelMatrix m;
  m.case_label = label;
  m.rows = rows;
  m.cols = cols;
  m.labels.assign(rows * cols, PairLabel::Discard);
  return m;
}

}  // namespace

bool LabelMatrix::row_has(std::size_t i, PairLabel label) const {
  for (std::size_t j = 0; j < cols; ++j)
    if ((*this)(i, j) == label) return true;
  return false;
}

LabelMatrix label_positive_doc(const std::vector<std::string>& query_crimes, const std::vector<std::string>& doc_crimes,
                               const SimilarityMatrix& m) {
  const auto q = normalized(query_crimes);
  const auto d = normalized(doc_crimes);
  if (m.rows() != q.size() || m.cols() != d.size())
    fail(ErrorKind::Shape, "similarity matrix does not match the crime lists");
  auto out = blank(q.size(), d.size(), CaseLabel::PositiveDoc);

  bool any_shared = false;
  for (const auto& c : q) any_shared = any_shared || std::find(d.begin(), d.end(), c) != d.end();

  if (any_shared) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (std::find(d.begin(), d.end(), q[i]) == d.end()) continue;  // whole row discarded
      for (std::size_t j = 0; j < d.size(); ++j) out.at(i, j) = d[j] == q[i] ? PairLabel::Positive : PairLabel::Negative;
    }
    return out;
  }

  // No shared crime: the most similar pair is the positive; ties resolve to
  // the lexicographically smallest (i, j).
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m(i, j) > m(bi, bj)) bi = i, bj = j;
  for (std::size_t j = 0; j < d.size(); ++j) out.at(bi, j) = j == bj ? PairLabel::Positive : PairLabel::Negative;
  return out;
}

LabelMatrix label_negative_doc(const std::vector<std::string>& query_crimes, const std::vector<std::string>& doc_crimes,
                               const std::vector<bool>& row_has_positive) {
  const auto q = normalized(query_crimes);
  const auto d = normalized(doc_crimes);
  if (row_has_positive.size() != q.size()) fail(ErrorKind::Shape, "row_has_positive length differs from query rows");
  auto out = blank(q.size(), d.size(), CaseLabel::NegativeDoc);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!row_has_positive[i]) continue;
    // Same-crime cells stay discarded: they may be unlabeled positives.
    for (std::size_t j = 0; j < d.size(); ++j)
      if (d[j] != q[i]) out.at(i, j) = PairLabel::Negative;
  }
  return out;
}

std::vector<LabelMatrix> label_query(const BatchQuery& query) {
  if (!query.positive.matrix) fail(ErrorKind::Contract, "positive document of " + query.query_id + " has no matrix");
  std::vector<LabelMatrix> out;
  auto pos = label_positive_doc(query.crimes, query.positive.crimes, *query.positive.matrix);
  pos.query_id = query.query_id;
  pos.doc_id = query.positive.doc_id;
  std::vector<bool> row_has_positive(pos.rows);
  for (std::size_t i = 0; i < pos.rows; ++i) row_has_positive[i] = pos.row_has(i, PairLabel::Positive);
  out.push_back(std::move(pos));
  for (const auto& neg : query.negatives) {
    auto m = label_negative_doc(query.crimes, neg.crimes, row_has_positive);
    m.query_id = query.query_id;
    m.doc_id = neg.doc_id;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::vector<LabelMatrix>> build_batch_labels(const std::vector<BatchQuery>& batch) {
  std::vector<std::vector<LabelMatrix>> out;
  out.reserve(batch.size());
  for (const auto& q : batch) out.push_back(label_query(q));
  return out;
}

nlohmann::json label_matrix_to_json(const LabelMatrix& labels) {
  nlohmann::json grid = nlohmann::json::array();
  for (std::size_t i = 0; i < labels.rows; ++i) {
    std::string row;
    for (std::size_t j = 0; j < labels.cols; ++j) {
      if (j) row += ' ';
      switch (labels(i, j)) {
        case PairLabel::Positive: row += 'P'; break;
        case PairLabel::Negative: row += 'N'; break;
        case PairLabel::Discard: row += '-'; break;
      }
    }
    grid.push_back(row);
  }
  return {{"query_id", labels.query_id},
          {"doc_id", labels.doc_id},
          {"case_label", labels.case_label == CaseLabel::PositiveDoc ? "positive" : "negative"},
          {"grid", grid}};
}

}  // namespace caseret
