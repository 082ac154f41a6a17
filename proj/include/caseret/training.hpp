#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "caseret/encoder.hpp"
#include "caseret/error.hpp"
#include "caseret/labeling.hpp"
#include "caseret/rng.hpp"
#include "caseret/scoring.hpp"

namespace caseret {

struct TrainConfig {
  double temperature = 0.01;
  double alpha = 0.9;
  std::size_t batch_size = 8;
  double learning_rate = 0.05;
  std::size_t steps = 200;
  std::uint64_t seed = 42;
  bool case_loss = true;
  bool subfact_loss = true;
  Aggregator aggregator = Aggregator::MaxSimSum;
  MeanMode mean_mode = MeanMode::GrandMean;

  // Throws Contract on tau <= 0, alpha < 0, batch size < 2, lr <= 0.
  void validate() const;
};

struct LossReport {
  std::size_t step = 0;
  double case_loss = 0.0;      // L_R
  double subfact_loss = 0.0;   // L_S
  double total = 0.0;          // L_R + alpha * L_S
  double grad_norm = 0.0;
  bool no_subfact_anchors = false;
};

nlohmann::json loss_report_to_json(const LossReport& report);

// -log(exp(s+/tau) / (exp(s+/tau) + sum exp(s-/tau))), via log-sum-exp.
double case_level_loss(double positive, std::span<const double> negatives, double tau);

struct Anchor {
  double positive;                // M[i][j+]
  std::vector<double> negatives;  // M[i][j-] over J-
};

struct SubfactLoss {
  double value = 0.0;
  std::size_t anchors_used = 0;
  bool no_anchors = false;
};

// Mean over anchors that have at least one negative.
SubfactLoss subfact_level_loss(std::span<const Anchor> anchors, double tau);

// Encoder plus the trainable kernel-pooling weights.
struct RankingModel {
  ToyEncoderModel encoder;
  std::vector<Kernel> kernels;
  std::vector<double> kernel_weights;

  static RankingModel init(std::size_t vocab_dim, std::size_t dim, std::uint64_t seed);
};

// Aggregated relevance of one (query, doc) pair under the configured aggregator.
double score_pair(const ReformulatedCase& query, const ReformulatedCase& doc, const RankingModel& model,
                  Aggregator aggregator, MeanMode mean_mode = MeanMode::GrandMean);

using CaseTable = std::map<std::string, ReformulatedCase, std::less<>>;

struct TrainingQuery {
  std::string query_id;
  std::vector<std::string> positives;
};

struct TrainingBatch {
  struct Item {
    std::string query_id;
    std::string positive;
    // In-batch negatives: the other items' positives, minus this query's positives.
    std::vector<std::string> negatives;
  };
  std::vector<Item> items;
};

TrainingBatch sample_batch(std::span<const TrainingQuery> queries, std::size_t batch_size, Rng& rng);

// Sub-fact labels per batch item, positive document first.
using BatchLabels = std::vector<std::vector<LabelMatrix>>;
BatchLabels label_batch(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                        const TrainConfig& config);

struct Gradient {
  std::vector<double> projection;      // V x D, same layout as the encoder weights
  std::vector<double> kernel_weights;
  double norm() const;
};

struct LossAndGrad {
  LossReport report;
  Gradient grad;
};

// L and its gradient. Scores use the configured aggregator; the row max
// routes all credit to its lowest-index argmax column. When `labels` is null
// they are derived from the current model.
LossAndGrad total_loss_and_grad(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                                const TrainConfig& config, const BatchLabels* labels = nullptr);
LossReport total_loss(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                      const TrainConfig& config, const BatchLabels* labels = nullptr);

inline constexpr double kDivergenceThreshold = 1e6;

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const LossReport& report);
  const LossReport& report() const { return report_; }

 private:
  LossReport report_;
};

// Plain gradient descent from `model`; deterministic for a fixed seed.
RankingModel train(const CaseTable& cases, std::span<const TrainingQuery> queries, const TrainConfig& config,
                   RankingModel model, const std::function<void(const LossReport&)>& on_step = {});

}  // namespace caseret
