#include "caseret/scoring.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/reformulate.hpp"
#include "caseret/text.hpp"

namespace caseret {

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ < 1 || cols_ < 1 || rows_ > kMaxSubfacts || cols_ > kMaxSubfacts)
    fail(ErrorKind::Shape, "similarity matrix must be between 1x1 and 4x4, got " + std::to_string(rows_) + "x" +
                               std::to_string(cols_));
  if (values_.size() != rows_ * cols_) fail(ErrorKind::Shape, "similarity matrix value count mismatch");
  for (double v : values_)
    if (!(v >= -1.0 - kRangeSlack && v <= 1.0 + kRangeSlack))
      fail(ErrorKind::Contract, "similarity value outside [-1, 1]");
}

SimilarityMatrix::SimilarityMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : SimilarityMatrix(rows.size(), rows.size() ? rows.begin()->size() : 0, [&] {
        std::vector<double> v;
        for (const auto& r : rows) {
          if (r.size() != rows.begin()->size()) fail(ErrorKind::Shape, "ragged similarity matrix");
          v.insert(v.end(), r.begin(), r.end());
        }
        return v;
      }()) {}

SimilarityMatrix similarity_matrix(std::span<const Embedding> query, std::span<const Embedding> doc) {
  if (query.empty() || doc.empty()) fail(ErrorKind::Shape, "similarity matrix needs non-empty embedding lists");
  const std::size_t dim = query.front().dim();
  for (const auto* side : {&query, &doc})
    for (const auto& e : *side) {
      if (e.dim() != dim) fail(ErrorKind::Shape, "embedding dimensions differ");
      if (!e.is_unit()) fail(ErrorKind::Contract, "similarity inputs must be unit vectors");
    }
  std::vector<double> values;
  values.reserve(query.size() * doc.size());
  for (const auto& q : query)
    for (const auto& d : doc) {
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += q.values[k] * d.values[k];
      values.push_back(dot);
    }
  return SimilarityMatrix(query.size(), doc.size(), std::move(values));
}

std::string_view to_string(Aggregator aggregator) {
  switch (aggregator) {
    case Aggregator::MaxSimSum: return "maxsim_sum";
    case Aggregator::Mean: return "mean";
    case Aggregator::KernelPool: return "kernel_pool";
    case Aggregator::SingleVector: return "single_vector";
  }
  return "?";
}

std::optional<Aggregator> parse_aggregator(std::string_view s) {
  const auto n = text::normalize_name(s);
  if (n == "maxsim_sum" || n == "maxsimsum" || n == "ms") return Aggregator::MaxSimSum;
  if (n == "mean") return Aggregator::Mean;
  if (n == "kernel_pool" || n == "kernelpool" || n == "kp") return Aggregator::KernelPool;
  if (n == "single_vector" || n == "singlevector" || n == "nc") return Aggregator::SingleVector;
  return std::nullopt;
}

std::string_view to_string(MeanMode mode) { return mode == MeanMode::GrandMean ? "grand" : "row_max"; }

std::optional<MeanMode> parse_mean_mode(std::string_view s) {
  const auto n = text::normalize_name(s);
  if (n == "grand") return MeanMode::GrandMean;
  if (n == "row_max") return MeanMode::RowMaxMean;
  return std::nullopt;
}

std::size_t row_argmax(const SimilarityMatrix& m, std::size_t row) {
  const auto r = m.row(row);
  std::size_t best = 0;
  for (std::size_t j = 1; j < r.size(); ++j)
    if (r[j] > r[best]) best = j;
  return best;
}

RelevanceScore maxsim_sum(const SimilarityMatrix& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) total += m(i, row_argmax(m, i));
  return {total, Aggregator::MaxSimSum};
}

RelevanceScore mean_aggregate(const SimilarityMatrix& m, MeanMode mode) {
  double total = 0.0;
  if (mode == MeanMode::GrandMean) {
    for (double v : m.values()) total += v;
    return {total / static_cast<double>(m.values().size()), Aggregator::Mean};
  }
  for (std::size_t i = 0; i < m.rows(); ++i) total += m(i, row_argmax(m, i));
  return {total / static_cast<double>(m.rows()), Aggregator::Mean};
}

std::vector<Kernel> default_kernels() {
  std::vector<Kernel> k{{1.0, 1e-3}};
  for (int step = 0; step < 10; ++step) k.push_back({0.9 - 0.2 * step, 0.1});
  return k;
}

std::vector<double> kernel_features(const SimilarityMatrix& m, std::span<const Kernel> kernels) {
  std::vector<double> phi;
  phi.reserve(kernels.size());
  for (const auto& k : kernels) {
    if (!(k.sigma > 0.0)) fail(ErrorKind::Domain, "kernel sigma must be positive");
    double f = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double soft_tf = 0.0;
      for (double v : m.row(i)) soft_tf += std::exp(-(v - k.mu) * (v - k.mu) / (2.0 * k.sigma * k.sigma));
      f += std::log(std::max(kKernelClamp, soft_tf));
    }
    phi.push_back(f);
  }
  return phi;
}

RelevanceScore kernel_pool(const SimilarityMatrix& m, std::span<const Kernel> kernels,
                           std::span<const double> weights) {
  if (kernels.size() != weights.size()) fail(ErrorKind::Shape, "kernel and weight counts differ");
  const auto phi = kernel_features(m, kernels);
  double s = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) s += weights[k] * phi[k];
  return {s, Aggregator::KernelPool};
}

RelevanceScore single_vector_score(const Embedding& query, const Embedding& doc) {
  if (query.dim() != doc.dim()) fail(ErrorKind::Shape, "embedding dimensions differ");
  double dot = 0.0;
  for (std::size_t k = 0; k < query.dim(); ++k) dot += query.values[k] * doc.values[k];
  return {dot, Aggregator::SingleVector};
}

std::vector<Attribution> attribute_matches(const SimilarityMatrix& m) {
  std::vector<Attribution> out;
  out.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto j = row_argmax(m, i);
    out.push_back({i, j, m(i, j)});
  }
  return out;
}

nlohmann::json explanation_to_json(const Explanation& e) {
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t i = 0; i < e.matrix.rows(); ++i)
    matrix.push_back(std::vector<double>(e.matrix.row(i).begin(), e.matrix.row(i).end()));
  nlohmann::json attributions = nlohmann::json::array();
  for (const auto& a : e.attributions) {
    attributions.push_back({
        {"q_index", a.query_index + 1},
        {"d_index", a.doc_index + 1},
        {"score", a.score},
        {"q_crime", a.query_index < e.query_crimes.size() ? e.query_crimes[a.query_index] : ""},
        {"d_crime", a.doc_index < e.doc_crimes.size() ? e.doc_crimes[a.doc_index] : ""},
    });
  }
  return {{"query_id", e.query_id},
          {"doc_id", e.doc_id},
          {"aggregator", std::string(to_string(e.aggregator))},
          {"matrix", matrix},
          {"attributions", attributions},
          {"score", e.score}};
}

std::string render_explanation(const Explanation& e) {
  std::string out = "query " + e.query_id + " vs document " + e.doc_id + " (" + std::string(to_string(e.aggregator)) +
                    ")\n";
  char buf[64];
  out += "        ";
  for (std::size_t j = 0; j < e.matrix.cols(); ++j) {
    std::snprintf(buf, sizeof buf, "     d%-3zu", j + 1);
    out += buf;
  }
  out += "\n";
  for (std::size_t i = 0; i < e.matrix.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "  q%-4zu", i + 1);
    out += buf;
    const auto best = row_argmax(e.matrix, i);
    for (std::size_t j = 0; j < e.matrix.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " %8.4f%c", e.matrix(i, j), j == best ? '*' : ' ');
      out += buf;
    }
    out += "\n";
  }
  for (std::size_t i = 0; i < e.query_crimes.size(); ++i) out += "  q" + std::to_string(i + 1) + ": " + e.query_crimes[i] + "\n";
  for (std::size_t j = 0; j < e.doc_crimes.size(); ++j) out += "  d" + std::to_string(j + 1) + ": " + e.doc_crimes[j] + "\n";
  for (const auto& a : e.attributions) {
    std::snprintf(buf, sizeof buf, "%.4f", a.score);
    out += "  match q" + std::to_string(a.query_index + 1) + " -> d" + std::to_string(a.doc_index + 1) + " (" + buf + ")\n";
  }
  std::snprintf(buf, sizeof buf, "%.6f", e.score);
  out += "  score " + std::string(buf) + "\n";
  return out;
}

}  // namespace caseret
