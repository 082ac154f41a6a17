#include "support/oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace oracle {

namespace {

std::string canon(const std::string& s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool same(const std::string& a, const std::string& b) { return canon(a) == canon(b); }

}  // namespace

Labels positive_doc(const std::vector<std::string>& q, const std::vector<std::string>& d, const Grid& m) {
  bool any_shared = false;
  for (const auto& a : q)
    for (const auto& b : d) any_shared = any_shared || same(a, b);

  Labels out(q.size(), std::vector<char>(d.size(), 'D'));
  if (any_shared) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      bool row_matches = false;
      for (const auto& b : d) row_matches = row_matches || same(q[i], b);
      if (!row_matches) continue;
      for (std::size_t j = 0; j < d.size(); ++j) out[i][j] = same(q[i], d[j]) ? 'P' : 'N';
    }
    return out;
  }
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j)
      if (m[i][j] > m[bi][bj]) bi = i, bj = j;
  for (std::size_t j = 0; j < d.size(); ++j) out[bi][j] = j == bj ? 'P' : 'N';
  return out;
}

Labels negative_doc(const std::vector<std::string>& q, const std::vector<std::string>& d,
                    const std::vector<bool>& row_has_positive) {
  Labels out(q.size(), std::vector<char>(d.size(), 'D'));
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!row_has_positive[i]) continue;
    for (std::size_t j = 0; j < d.size(); ++j) out[i][j] = same(q[i], d[j]) ? 'D' : 'N';
  }
  return out;
}

Labels from(const caseret::LabelMatrix& labels) {
  Labels out(labels.rows, std::vector<char>(labels.cols));
  for (std::size_t i = 0; i < labels.rows; ++i)
    for (std::size_t j = 0; j < labels.cols; ++j) {
      const auto l = labels(i, j);
      out[i][j] = l == caseret::PairLabel::Positive ? 'P' : l == caseret::PairLabel::Negative ? 'N' : 'D';
    }
  return out;
}

double maxsim_sum(const Grid& m) {
  double total = 0.0;
  for (const auto& row : m) {
    double best = row[0];
    for (double v : row) best = v > best ? v : best;
    total += best;
  }
  return total;
}

double grand_mean(const Grid& m) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& row : m)
    for (double v : row) total += v, ++n;
  return total / static_cast<double>(n);
}

double row_max_mean(const Grid& m) { return maxsim_sum(m) / static_cast<double>(m.size()); }

double kernel_pool(const Grid& m, const std::vector<caseret::Kernel>& kernels, const std::vector<double>& weights) {
  double score = 0.0;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    double phi = 0.0;
    for (const auto& row : m) {
      double soft = 0.0;
      for (double v : row) soft += std::exp(-std::pow(v - kernels[k].mu, 2) / (2 * std::pow(kernels[k].sigma, 2)));
      phi += std::log(std::max(soft, 1e-10));
    }
    score += weights[k] * phi;
  }
  return score;
}

double precision(const std::vector<std::string>& ranking, const std::set<std::string>& relevant, std::size_t k) {
  double hits = 0;
  for (std::size_t r = 0; r < k && r < ranking.size(); ++r)
    if (relevant.count(ranking[r])) hits += 1;
  return hits / static_cast<double>(k);
}

std::optional<double> average_precision(const std::vector<std::string>& ranking, const std::set<std::string>& relevant) {
  if (relevant.empty()) return std::nullopt;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (!relevant.count(ranking[r])) continue;
    sum += precision(ranking, relevant, r + 1);
  }
  return sum / static_cast<double>(relevant.size());
}

double ndcg(const std::vector<std::string>& ranking, const std::map<std::string, int>& grades, std::size_t k) {
  auto grade = [&](const std::string& id) {
    const auto it = grades.find(id);
    return it == grades.end() ? 0 : it->second;
  };
  double dcg = 0.0;
  for (std::size_t r = 1; r <= k && r <= ranking.size(); ++r) dcg += grade(ranking[r - 1]) / std::log2(r + 1.0);
  std::vector<std::pair<int, std::string>> ideal;
  for (const auto& [id, g] : grades) ideal.push_back({-g, id});
  std::sort(ideal.begin(), ideal.end());
  double idcg = 0.0;
  for (std::size_t r = 1; r <= k && r <= ideal.size(); ++r) idcg += -ideal[r - 1].first / std::log2(r + 1.0);
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

}  // namespace oracle
