#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "caseret/scoring.hpp"

namespace caseret {

enum class PairLabel { Positive, Negative, Discard };
enum class CaseLabel { PositiveDoc, NegativeDoc };

struct LabelMatrix {
  std::string query_id;
  std::string doc_id;
  CaseLabel case_label = CaseLabel::PositiveDoc;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<PairLabel> labels;

  PairLabel operator()(std::size_t i, std::size_t j) const { return labels[i * cols + j]; }
  PairLabel& at(std::size_t i, std::size_t j) { return labels[i * cols + j]; }
  bool row_has(std::size_t i, PairLabel label) const;
  bool operator==(const LabelMatrix&) const = default;
};

// Sub-fact labels for a case-level positive document. Crimes compare on their
// normalized names.
LabelMatrix label_positive_doc(const std::vector<std::string>& query_crimes, const std::vector<std::string>& doc_crimes,
                               const SimilarityMatrix& m);

// Sub-fact labels for a case-level negative document. row_has_positive[i]
// tells whether query row i received a positive anywhere in the batch.
LabelMatrix label_negative_doc(const std::vector<std::string>& query_crimes, const std::vector<std::string>& doc_crimes,
                               const std::vector<bool>& row_has_positive);

struct LabeledDoc {
  std::string doc_id;
  std::vector<std::string> crimes;
  const SimilarityMatrix* matrix = nullptr;  // query x doc; required for the positive doc
};

struct BatchQuery {
  std::string query_id;
  std::vector<std::string> crimes;
  LabeledDoc positive;
  std::vector<LabeledDoc> negatives;
};

// Positive-document matrix first, then one matrix per negative, in order.
std::vector<LabelMatrix> label_query(const BatchQuery& query);
std::vector<std::vector<LabelMatrix>> build_batch_labels(const std::vector<BatchQuery>& batch);

// Text grid with P / N / - cells.
nlohmann::json label_matrix_to_json(const LabelMatrix& labels);

}  // namespace caseret
