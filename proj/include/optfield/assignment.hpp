#pragma once

#include <vector>

#include <Eigen/Dense>

namespace optfield {

/// Exact square assignment (Hungarian method with potentials, O(n^3)).
/// Returns assignment[row] = column minimizing the summed cost.
std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace optfield
