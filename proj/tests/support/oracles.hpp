#pragma once

// Second, deliberately literal implementations used to cross-check the library.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "caseret/labeling.hpp"
#include "caseret/scoring.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

// 'P', 'N', 'D' per cell.
using Labels = std::vector<std::vector<char>>;

Labels positive_doc(const std::vector<std::string>& q, const std::vector<std::string>& d, const Grid& m);
Labels negative_doc(const std::vector<std::string>& q, const std::vector<std::string>& d,
                    const std::vector<bool>& row_has_positive);
Labels from(const caseret::LabelMatrix& labels);

double maxsim_sum(const Grid& m);
double grand_mean(const Grid& m);
double row_max_mean(const Grid& m);
double kernel_pool(const Grid& m, const std::vector<caseret::Kernel>& kernels, const std::vector<double>& weights);

// Ranking given best first; relevant = grade-based positives.
double precision(const std::vector<std::string>& ranking, const std::set<std::string>& relevant, std::size_t k);
std::optional<double> average_precision(const std::vector<std::string>& ranking, const std::set<std::string>& relevant);
double ndcg(const std::vector<std::string>& ranking, const std::map<std::string, int>& grades, std::size_t k);

}  // namespace oracle
