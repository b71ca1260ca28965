// Copyright 2026 The sylcut Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace sylcut {

/// Minimum-cost assignment on a rectangular cost matrix (Kuhn-Munkres with
/// row/column potentials, O(n^3)). The matrix is padded to square with
/// zero-cost dummy rows/columns. Returns, for every row, the assigned column
/// or -1 when the row landed on a dummy column.
inline std::vector<std::ptrdiff_t> solve_assignment(const Eigen::MatrixXd& cost) {
  using Idx = std::ptrdiff_t;
  const Idx rows = cost.rows();
  const Idx cols = cost.cols();
  const Idx n = std::max(rows, cols);
  if (n == 0) return {};
  auto c = [&](Idx i, Idx j) { return (i < rows && j < cols) ? cost(i, j) : 0.0; };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] = row matched to column j, 0 = none
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Idx> p(static_cast<std::size_t>(n + 1), 0);
  std::vector<Idx> way(static_cast<std::size_t>(n + 1), 0);
  for (Idx i = 1; i <= n; ++i) {
    p[0] = i;
    Idx j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Idx i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      Idx j1 = 0;
      for (Idx j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = c(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Idx j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Idx j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Idx> row_to_col(static_cast<std::size_t>(rows), -1);
  for (Idx j = 1; j <= n; ++j) {
    const Idx i = p[static_cast<std::size_t>(j)];
    if (i >= 1 && i <= rows && j <= cols) row_to_col[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return row_to_col;
}

}  // namespace sylcut
