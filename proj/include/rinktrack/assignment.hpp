#pragma once

#include <vector>

#include <Eigen/Core>

namespace rinktrack {

/// Minimum-cost assignment on a rectangular cost matrix (Hungarian method).
/// Returns, for every row, the assigned column or -1. The number of assigned
/// rows is min(rows, cols).
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

/// Maximum-weight matching; pairs whose weight is not strictly positive are
/// reported as unassigned.
std::vector<int> max_weight_matching(const Eigen::MatrixXd& weight);

}  // namespace rinktrack
