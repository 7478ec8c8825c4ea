#include "optfield/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace optfield {

std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("assignment: cost must be square");
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based arrays; column 0 is a virtual start column.
  std::vector<double> row_pot(n + 1, 0.0);
  std::vector<double> col_pot(n + 1, 0.0);
  std::vector<Eigen::Index> col_owner(n + 1, 0);
  std::vector<Eigen::Index> way(n + 1, 0);

  for (Eigen::Index row = 1; row <= n; ++row) {
    col_owner[0] = row;
    Eigen::Index col0 = 0;
    std::vector<double> min_slack(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const Eigen::Index row0 = col_owner[col0];
      double delta = kInf;
      Eigen::Index col1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double slack = cost(row0 - 1, j - 1) - row_pot[row0] - col_pot[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = col0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          col1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[col_owner[j]] += delta;
          col_pot[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      col0 = col1;
    } while (col_owner[col0] != 0);
    do {
      const Eigen::Index col1 = way[col0];
      col_owner[col0] = col_owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<Eigen::Index> assignment(n, -1);
  for (Eigen::Index j = 1; j <= n; ++j) assignment[col_owner[j] - 1] = j - 1;
  return assignment;
}

}  // namespace optfield
