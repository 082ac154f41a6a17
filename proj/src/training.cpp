#include "caseret/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "caseret/io.hpp"

namespace caseret {

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) fail(ErrorKind::Contract, "temperature must be positive");
  if (!(alpha >= 0.0)) fail(ErrorKind::Contract, "alpha must be non-negative");
  if (batch_size < 2) fail(ErrorKind::Contract, "batch size must be at least 2");
  if (!(learning_rate > 0.0)) fail(ErrorKind::Contract, "learning rate must be positive");
}

nlohmann::json loss_report_to_json(const LossReport& r) {
  return {{"step", r.step}, {"L_R", r.case_loss}, {"L_S", r.subfact_loss}, {"L", r.total}, {"grad_norm", r.grad_norm}};
}

namespace {

double log_sum_exp(std::span<const double> x) {
  const double hi = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - hi);
  return hi + std::log(s);
}

// Loss -log softmax(x)[0] and its gradient with respect to the raw scores
// (x = scores / tau).
double softmax_loss(std::span<const double> scores, double tau, std::vector<double>* grad) {
  std::vector<double> x(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) x[k] = scores[k] / tau;
  const double lse = log_sum_exp(x);
  if (grad) {
    grad->resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) (*grad)[k] = (std::exp(x[k] - lse) - (k == 0 ? 1.0 : 0.0)) / tau;
  }
  return lse - x[0];
}

}  // namespace

double case_level_loss(double positive, std::span<const double> negatives, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::Contract, "temperature must be positive");
  if (negatives.empty()) fail(ErrorKind::Contract, "case-level loss needs at least one negative");
  std::vector<double> scores{positive};
  scores.insert(scores.end(), negatives.begin(), negatives.end());
  return softmax_loss(scores, tau, nullptr);
}

SubfactLoss subfact_level_loss(std::span<const Anchor> anchors, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::Contract, "temperature must be positive");
  SubfactLoss out;
  double total = 0.0;
  for (const auto& a : anchors) {
    if (a.negatives.empty()) continue;
    total += case_level_loss(a.positive, a.negatives, tau);
    ++out.anchors_used;
  }
  if (out.anchors_used == 0) {
    out.no_anchors = true;
    return out;
  }
  out.value = total / static_cast<double>(out.anchors_used);
  return out;
}

RankingModel RankingModel::init(std::size_t vocab_dim, std::size_t dim, std::uint64_t seed) {
  RankingModel m{ToyEncoderModel::init(vocab_dim, dim, seed), default_kernels(), {}};
  m.kernel_weights.assign(m.kernels.size(), 0.0);
  return m;
}

namespace {

struct EncodedVector {
  SparseVector features;
  std::vector<double> z;
  double radius = 0.0;
  Embedding unit;
};

using EncodedCase = std::vector<EncodedVector>;

EncodedVector encode_vector(const ToyEncoderModel& model, std::string_view text, const std::string& where) {
  EncodedVector v;
  v.features = featurize(text, model.vocab_dim());
  if (v.features.empty()) fail(ErrorKind::Encode, where + ": text has no tokens");
  v.z = model.project(v.features);
  double s = 0.0;
  for (double x : v.z) s += x * x;
  v.radius = std::sqrt(s);
  try {
    v.unit.values = normalize(v.z);
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
  return v;
}

EncodedCase encode_case(const ReformulatedCase& rc, const ToyEncoderModel& model, bool single_vector) {
  EncodedCase out;
  if (single_vector) {
    if (rc.subfacts.empty()) fail(ErrorKind::Encode, "case " + rc.case_id + " has no sub-facts");
    out.push_back(encode_vector(model, concat_text(rc), rc.case_id));
  } else {
    for (const auto& sf : rc.subfacts) out.push_back(encode_vector(model, sf.text(), rc.case_id + "/" + sf.crime));
  }
  return out;
}

std::vector<Embedding> units(const EncodedCase& c) {
  std::vector<Embedding> out;
  out.reserve(c.size());
  for (const auto& v : c) out.push_back(v.unit);
  return out;
}

std::vector<std::string> crimes_of(const ReformulatedCase& rc) {
  std::vector<std::string> out;
  for (const auto& sf : rc.subfacts) out.push_back(sf.crime);
  return out;
}

double aggregate(const SimilarityMatrix& m, const RankingModel& model, Aggregator aggregator, MeanMode mean_mode) {
  switch (aggregator) {
    case Aggregator::MaxSimSum: return maxsim_sum(m).value;
    case Aggregator::Mean: return mean_aggregate(m, mean_mode).value;
    case Aggregator::KernelPool: return kernel_pool(m, model.kernels, model.kernel_weights).value;
    case Aggregator::SingleVector: break;
  }
  fail(ErrorKind::Contract, "single-vector scoring has no similarity matrix");
}

// d score / d M (row-major) and d score / d kernel weights.
void aggregate_grad(const SimilarityMatrix& m, const RankingModel& model, const TrainConfig& config,
                    std::vector<double>& d_matrix, std::vector<double>& d_weights) {
  const std::size_t rows = m.rows(), cols = m.cols();
  d_matrix.assign(rows * cols, 0.0);
  d_weights.assign(model.kernel_weights.size(), 0.0);
  switch (config.aggregator) {
    case Aggregator::MaxSimSum:
      for (std::size_t i = 0; i < rows; ++i) d_matrix[i * cols + row_argmax(m, i)] = 1.0;
      return;
    case Aggregator::Mean:
      if (config.mean_mode == MeanMode::GrandMean) {
        std::fill(d_matrix.begin(), d_matrix.end(), 1.0 / static_cast<double>(rows * cols));
      } else {
        for (std::size_t i = 0; i < rows; ++i) d_matrix[i * cols + row_argmax(m, i)] = 1.0 / static_cast<double>(rows);
      }
      return;
    case Aggregator::KernelPool: {
      d_weights = kernel_features(m, model.kernels);
      for (std::size_t k = 0; k < model.kernels.size(); ++k) {
        const auto [mu, sigma] = model.kernels[k];
        const double w = model.kernel_weights[k];
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < rows; ++i) {
          double soft_tf = 0.0;
          std::vector<double> e(cols);
          for (std::size_t j = 0; j < cols; ++j) {
            const double diff = m(i, j) - mu;
            e[j] = std::exp(-diff * diff / (2.0 * sigma * sigma));
            soft_tf += e[j];
          }
          if (soft_tf <= kKernelClamp) continue;  // clamped: locally constant
          for (std::size_t j = 0; j < cols; ++j)
            d_matrix[i * cols + j] += w * e[j] * (-(m(i, j) - mu) / (sigma * sigma)) / soft_tf;
        }
      }
      return;
    }
    case Aggregator::SingleVector: return;
  }
}

const ReformulatedCase& lookup(const CaseTable& cases, const std::string& id) {
  const auto it = cases.find(id);
  if (it == cases.end()) fail(ErrorKind::Lookup, "case " + id + " has no reformulation");
  return it->second;
}

struct Forward {
  std::map<std::string, EncodedCase> encoded;
  // Per item, per doc (positive first): matrix (absent for single-vector) and score.
  std::vector<std::vector<std::optional<SimilarityMatrix>>> matrices;
  std::vector<std::vector<double>> scores;
};

Forward forward(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                const TrainConfig& config) {
  const bool single = config.aggregator == Aggregator::SingleVector;
  Forward f;
  auto encoded = [&](const std::string& id) -> const EncodedCase& {
    auto it = f.encoded.find(id);
    if (it == f.encoded.end()) it = f.encoded.emplace(id, encode_case(lookup(cases, id), model.encoder, single)).first;
    return it->second;
  };
  for (const auto& item : batch.items) {
    const auto q = units(encoded(item.query_id));
    auto& mats = f.matrices.emplace_back();
    auto& scores = f.scores.emplace_back();
    std::vector<const std::string*> docs{&item.positive};
    for (const auto& n : item.negatives) docs.push_back(&n);
    for (const auto* doc_id : docs) {
      const auto d = units(encoded(*doc_id));
      if (single) {
        mats.emplace_back();
        scores.push_back(single_vector_score(q[0], d[0]).value);
      } else {
        auto m = similarity_matrix(q, d);
        scores.push_back(aggregate(m, model, config.aggregator, config.mean_mode));
        mats.emplace_back(std::move(m));
      }
    }
  }
  return f;
}

BatchLabels labels_from(const TrainingBatch& batch, const CaseTable& cases, const Forward& f) {
  BatchLabels out;
  for (std::size_t b = 0; b < batch.items.size(); ++b) {
    const auto& item = batch.items[b];
    BatchQuery q{item.query_id, crimes_of(lookup(cases, item.query_id)),
                 {item.positive, crimes_of(lookup(cases, item.positive)), &*f.matrices[b][0]}, {}};
    for (std::size_t k = 0; k < item.negatives.size(); ++k)
      q.negatives.push_back({item.negatives[k], crimes_of(lookup(cases, item.negatives[k])), &*f.matrices[b][k + 1]});
    out.push_back(label_query(q));
  }
  return out;
}

LossAndGrad evaluate(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                     const TrainConfig& config, const BatchLabels* given_labels, bool want_grad) {
  config.validate();
  const bool single = config.aggregator == Aggregator::SingleVector;
  const Forward f = forward(batch, cases, model, config);

  BatchLabels derived;
  const BatchLabels* labels = given_labels;
  if (!single && config.subfact_loss && !labels) {
    derived = labels_from(batch, cases, f);
    labels = &derived;
  }

  // Upstream gradients: per item, per doc, on the score and on the matrix.
  std::vector<std::vector<double>> g_score(batch.items.size());
  std::vector<std::vector<std::vector<double>>> g_matrix(batch.items.size());
  for (std::size_t b = 0; b < batch.items.size(); ++b) {
    g_score[b].assign(f.scores[b].size(), 0.0);
    g_matrix[b].resize(f.scores[b].size());
    for (std::size_t k = 0; k < f.scores[b].size(); ++k)
      if (f.matrices[b][k]) g_matrix[b][k].assign(f.matrices[b][k]->values().size(), 0.0);
  }

  LossReport report;
  if (config.case_loss) {
    std::size_t counted = 0;
    for (const auto& s : f.scores) counted += s.size() > 1 ? 1 : 0;
    double total = 0.0;
    std::vector<double> g;
    for (std::size_t b = 0; b < batch.items.size(); ++b) {
      if (f.scores[b].size() < 2) continue;
      total += case_level_loss(f.scores[b][0], std::span(f.scores[b]).subspan(1), config.temperature);
      softmax_loss(f.scores[b], config.temperature, &g);
      for (std::size_t k = 0; k < g.size(); ++k) g_score[b][k] = g[k] / static_cast<double>(counted);
    }
    report.case_loss = counted ? total / static_cast<double>(counted) : 0.0;
  }

  if (single || !config.subfact_loss) {
    report.no_subfact_anchors = true;
  } else {
    if (labels->size() != batch.items.size()) fail(ErrorKind::Shape, "label batch does not match the training batch");
    struct Cell {
      std::size_t doc, i, j;
    };
    struct AnchorCells {
      std::size_t item;
      Cell positive;
      std::vector<Cell> negatives;
    };
    std::vector<Anchor> anchors;
    std::vector<AnchorCells> cells;
    for (std::size_t b = 0; b < batch.items.size(); ++b) {
      const auto& item_labels = (*labels)[b];
      if (item_labels.size() != f.matrices[b].size()) fail(ErrorKind::Shape, "label count does not match documents");
      const auto& pos = item_labels[0];
      for (std::size_t i = 0; i < pos.rows; ++i) {
        std::vector<Cell> negatives;
        for (std::size_t k = 0; k < item_labels.size(); ++k)
          for (std::size_t j = 0; j < item_labels[k].cols; ++j)
            if (item_labels[k](i, j) == PairLabel::Negative) negatives.push_back({k, i, j});
        if (negatives.empty()) continue;
        for (std::size_t j = 0; j < pos.cols; ++j) {
          if (pos(i, j) != PairLabel::Positive) continue;
          Anchor a{(*f.matrices[b][0])(i, j), {}};
          for (const auto& c : negatives) a.negatives.push_back((*f.matrices[b][c.doc])(c.i, c.j));
          anchors.push_back(std::move(a));
          cells.push_back({b, {0, i, j}, negatives});
        }
      }
    }
    const auto sub = subfact_level_loss(anchors, config.temperature);
    report.no_subfact_anchors = sub.no_anchors;
    report.subfact_loss = sub.value;
    if (!sub.no_anchors && want_grad) {
      const double scale = config.alpha / static_cast<double>(sub.anchors_used);
      std::vector<double> g;
      for (std::size_t a = 0; a < anchors.size(); ++a) {
        std::vector<double> scores{anchors[a].positive};
        scores.insert(scores.end(), anchors[a].negatives.begin(), anchors[a].negatives.end());
        softmax_loss(scores, config.temperature, &g);
        const auto& c = cells[a];
        auto add = [&](const Cell& cell, double v) {
          g_matrix[c.item][cell.doc][cell.i * f.matrices[c.item][cell.doc]->cols() + cell.j] += scale * v;
        };
        add(c.positive, g[0]);
        for (std::size_t n = 0; n < c.negatives.size(); ++n) add(c.negatives[n], g[n + 1]);
      }
    }
  }
  report.total = report.case_loss + config.alpha * report.subfact_loss;

  LossAndGrad out{report, {}};
  if (!want_grad) return out;

  const auto& enc = model.encoder;
  const std::size_t dim = enc.dim();
  out.grad.projection.assign(enc.weights().size(), 0.0);
  out.grad.kernel_weights.assign(model.kernel_weights.size(), 0.0);

  // d L / d unit embedding, per case and vector.
  std::map<std::string, std::vector<std::vector<double>>> g_unit;
  for (const auto& [id, c] : f.encoded) g_unit[id].assign(c.size(), std::vector<double>(dim, 0.0));

  std::vector<double> d_matrix, d_weights;
  for (std::size_t b = 0; b < batch.items.size(); ++b) {
    const auto& item = batch.items[b];
    const auto& q = f.encoded.at(item.query_id);
    auto& gq = g_unit.at(item.query_id);
    for (std::size_t k = 0; k < f.scores[b].size(); ++k) {
      const auto& doc_id = k == 0 ? item.positive : item.negatives[k - 1];
      const auto& d = f.encoded.at(doc_id);
      auto& gd = g_unit.at(doc_id);
      if (single) {
        const double gs = g_score[b][k];
        for (std::size_t x = 0; x < dim; ++x) {
          gq[0][x] += gs * d[0].unit.values[x];
          gd[0][x] += gs * q[0].unit.values[x];
        }
        continue;
      }
      const auto& m = *f.matrices[b][k];
      auto gm = g_matrix[b][k];
      if (g_score[b][k] != 0.0) {
        aggregate_grad(m, model, config, d_matrix, d_weights);
        for (std::size_t c = 0; c < gm.size(); ++c) gm[c] += g_score[b][k] * d_matrix[c];
        for (std::size_t w = 0; w < d_weights.size(); ++w) out.grad.kernel_weights[w] += g_score[b][k] * d_weights[w];
      }
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
          const double g = gm[i * m.cols() + j];
          if (g == 0.0) continue;
          for (std::size_t x = 0; x < dim; ++x) {
            gq[i][x] += g * d[j].unit.values[x];
            gd[j][x] += g * q[i].unit.values[x];
          }
        }
    }
  }

  // Through e = z / |z| and z = W^T f.
  std::vector<double> gz(dim);
  for (const auto& [id, c] : f.encoded) {
    const auto& gu = g_unit.at(id);
    for (std::size_t v = 0; v < c.size(); ++v) {
      const auto& e = c[v].unit.values;
      double dot = 0.0;
      for (std::size_t x = 0; x < dim; ++x) dot += e[x] * gu[v][x];
      for (std::size_t x = 0; x < dim; ++x) gz[x] = (gu[v][x] - e[x] * dot) / c[v].radius;
      for (const auto& [bucket, count] : c[v].features) {
        double* row = out.grad.projection.data() + static_cast<std::size_t>(bucket) * dim;
        for (std::size_t x = 0; x < dim; ++x) row[x] += count * gz[x];
      }
    }
  }
  out.report.grad_norm = out.grad.norm();
  return out;
}

}  // namespace

double score_pair(const ReformulatedCase& query, const ReformulatedCase& doc, const RankingModel& model,
                  Aggregator aggregator, MeanMode mean_mode) {
  if (aggregator == Aggregator::SingleVector)
    return single_vector_score(encode_concat(query, model.encoder), encode_concat(doc, model.encoder)).value;
  const ToyEncoderProvider provider(model.encoder);
  const auto m = similarity_matrix(provider.encode_case(query), provider.encode_case(doc));
  return aggregate(m, model, aggregator, mean_mode);
}

TrainingBatch sample_batch(std::span<const TrainingQuery> queries, std::size_t batch_size, Rng& rng) {
  std::vector<const TrainingQuery*> eligible;
  for (const auto& q : queries)
    if (!q.positives.empty()) eligible.push_back(&q);
  if (eligible.empty()) fail(ErrorKind::Contract, "no training query has a positive document");

  TrainingBatch batch;
  for (std::size_t idx : rng.sample_without_replacement(eligible.size(), batch_size)) {
    const auto& q = *eligible[idx];
    batch.items.push_back({q.query_id, q.positives[rng.below(q.positives.size())], {}});
  }
  for (std::size_t a = 0; a < batch.items.size(); ++a) {
    const auto& own = *std::find_if(eligible.begin(), eligible.end(),
                                    [&](const auto* q) { return q->query_id == batch.items[a].query_id; });
    std::set<std::string> excluded(own->positives.begin(), own->positives.end());
    for (std::size_t b = 0; b < batch.items.size(); ++b) {
      if (a == b) continue;
      const auto& candidate = batch.items[b].positive;
      if (excluded.insert(candidate).second) batch.items[a].negatives.push_back(candidate);
    }
  }
  return batch;
}

BatchLabels label_batch(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                        const TrainConfig& config) {
  if (config.aggregator == Aggregator::SingleVector) return {};
  return labels_from(batch, cases, forward(batch, cases, model, config));
}

double Gradient::norm() const {
  double s = 0.0;
  for (double g : projection) s += g * g;
  for (double g : kernel_weights) s += g * g;
  return std::sqrt(s);
}

LossAndGrad total_loss_and_grad(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                                const TrainConfig& config, const BatchLabels* labels) {
  auto out = evaluate(batch, cases, model, config, labels, true);
  if (!std::isfinite(out.report.total) || !std::isfinite(out.report.grad_norm))
    fail(ErrorKind::Numerical, "non-finite loss or gradient (L_R " + io::format_double(out.report.case_loss) +
                                   ", L_S " + io::format_double(out.report.subfact_loss) + ")");
  return out;
}

LossReport total_loss(const TrainingBatch& batch, const CaseTable& cases, const RankingModel& model,
                      const TrainConfig& config, const BatchLabels* labels) {
  return evaluate(batch, cases, model, config, labels, false).report;
}

TrainingDiverged::TrainingDiverged(const LossReport& report)
    : Error(ErrorKind::Numerical, "training diverged at step " + std::to_string(report.step) + ": L " +
                                      io::format_double(report.total) + ", grad norm " +
                                      io::format_double(report.grad_norm)),
      report_(report) {}

RankingModel train(const CaseTable& cases, std::span<const TrainingQuery> queries, const TrainConfig& config,
                   RankingModel model, const std::function<void(const LossReport&)>& on_step) {
  config.validate();
  bool any_positive = false;
  for (const auto& q : queries) {
    lookup(cases, q.query_id);
    for (const auto& p : q.positives) lookup(cases, p);
    any_positive = any_positive || !q.positives.empty();
  }
  if (!any_positive) fail(ErrorKind::Contract, "training needs at least one query with a positive document");
  if (model.kernel_weights.size() != model.kernels.size())
    fail(ErrorKind::Shape, "kernel weights do not match the kernels");

  Rng rng(config.seed);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto batch = sample_batch(queries, config.batch_size, rng);
    LossAndGrad lg;
    try {
      lg = total_loss_and_grad(batch, cases, model, config);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
      LossReport r;
      r.step = step;
      r.total = std::numeric_limits<double>::quiet_NaN();
      throw TrainingDiverged(r);
    }
    lg.report.step = step;
    if (lg.report.total > kDivergenceThreshold) throw TrainingDiverged(lg.report);
    if (on_step) on_step(lg.report);
    auto weights = model.encoder.weights();
    for (std::size_t k = 0; k < weights.size(); ++k) weights[k] -= config.learning_rate * lg.grad.projection[k];
    for (std::size_t k = 0; k < model.kernel_weights.size(); ++k)
      model.kernel_weights[k] -= config.learning_rate * lg.grad.kernel_weights[k];
  }
  return model;
}

}  // namespace caseret
