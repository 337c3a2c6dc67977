#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "e2efs/data.hpp"

namespace e2efs {

/// Mean per-class recall over the classes present in `labels`.
double balanced_accuracy(const Labels& predictions, const Labels& labels);

/// Unweighted mean of the BA values over the feature-count grid.
double auc_ba(const std::vector<std::pair<std::size_t, double>>& ba_at_counts);

} // namespace e2efs
