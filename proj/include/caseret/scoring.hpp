#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "caseret/encoder.hpp"

namespace caseret {

// M[i][j] = q_i . d_j over unit embeddings; rows are query sub-facts.
class SimilarityMatrix {
 public:
  static constexpr double kRangeSlack = 1e-9;

  SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  SimilarityMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const SimilarityMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

SimilarityMatrix similarity_matrix(std::span<const Embedding> query, std::span<const Embedding> doc);

enum class Aggregator { MaxSimSum, Mean, KernelPool, SingleVector };
std::string_view to_string(Aggregator aggregator);
std::optional<Aggregator> parse_aggregator(std::string_view s);

// Mean ablation readings: mean over every cell, or mean of the row maxima.
enum class MeanMode { GrandMean, RowMaxMean };
std::string_view to_string(MeanMode mode);
std::optional<MeanMode> parse_mean_mode(std::string_view s);

struct RelevanceScore {
  double value = 0.0;
  Aggregator aggregator = Aggregator::MaxSimSum;
};

// Column of the row maximum; ties go to the lowest column.
std::size_t row_argmax(const SimilarityMatrix& m, std::size_t row);

// Sum over query rows of the row maximum.
RelevanceScore maxsim_sum(const SimilarityMatrix& m);
RelevanceScore mean_aggregate(const SimilarityMatrix& m, MeanMode mode = MeanMode::GrandMean);

struct Kernel {
  double mu;
  double sigma;
};

inline constexpr double kKernelClamp = 1e-10;

// Exact-match kernel (mu 1, sigma 1e-3) followed by mu = 0.9, 0.7, ..., -0.9 at sigma 0.1.
std::vector<Kernel> default_kernels();

// phi_k = sum_i log(max(eps, sum_j exp(-(M_ij - mu_k)^2 / (2 sigma_k^2)))).
std::vector<double> kernel_features(const SimilarityMatrix& m, std::span<const Kernel> kernels);
RelevanceScore kernel_pool(const SimilarityMatrix& m, std::span<const Kernel> kernels, std::span<const double> weights);

RelevanceScore single_vector_score(const Embedding& query, const Embedding& doc);

struct Attribution {
  std::size_t query_index;
  std::size_t doc_index;
  double score;
};

// One entry per query row: its argmax column and value. The scores sum to
// maxsim_sum(m) exactly.
std::vector<Attribution> attribute_matches(const SimilarityMatrix& m);

struct Explanation {
  std::string query_id;
  std::string doc_id;
  Aggregator aggregator = Aggregator::MaxSimSum;
  SimilarityMatrix matrix{{0.0}};
  std::vector<Attribution> attributions;
  std::vector<std::string> query_crimes;
  std::vector<std::string> doc_crimes;
  double score = 0.0;
};

// Indices in the JSON and text forms are 1-based, matching q1..qm / d1..dn.
nlohmann::json explanation_to_json(const Explanation& e);
std::string render_explanation(const Explanation& e);

}  // namespace caseret
