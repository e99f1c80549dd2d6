/*
 * Copyright 2026 The imprintlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "imprintlab/linalg.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace imprintlab {

template <typename T>
Tensor<T> Matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: " + ShapeToString(a.shape()) + " x " +
                     ShapeToString(b.shape()));
  }
  const std::size_t n = a.shape()[0];
  const std::size_t inner = a.shape()[1];
  const std::size_t m = b.shape()[1];
  Tensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < inner; ++p) acc += a.at(i, p) * b.at(p, j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

template Tensor<float> Matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> Matmul(const Tensor<double>&, const Tensor<double>&);

TensorD DctRow(std::size_t m, std::size_t freq) {
  if (m == 0 || freq >= m) {
    throw std::out_of_range("dct_row: frequency " + std::to_string(freq) +
                            " outside [0, " + std::to_string(m) + ")");
  }
  std::vector<double> row(m);
  const double scale = 4.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    row[j] = scale * std::cos(std::numbers::pi * static_cast<double>(freq) *
                              static_cast<double>(2 * j + 1) /
                              static_cast<double>(2 * m));
  }
  return TensorD::Vector(std::move(row));
}

template <typename T>
Tensor<T> RandGaussian(RngStream& stream, Shape shape) {
  Tensor<T> out(std::move(shape));
  for (auto& v : out.data()) v = static_cast<T>(stream.Normal());
  return out;
}

template Tensor<float> RandGaussian(RngStream&, Shape);
template Tensor<double> RandGaussian(RngStream&, Shape);

namespace {

// Shortest-augmenting-path Hungarian with potentials for n <= m: every row
// gets a distinct column. 1-based; p[j] is the row matched to column j.
template <typename Cost>
std::vector<std::size_t> HungarianRowsLeCols(std::size_t n, std::size_t m, Cost cost) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, kUnassigned);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

std::vector<std::size_t> SolveAssignment(const TensorD& cost) {
  if (cost.rank() != 2) throw ShapeError("assignment: cost must be a matrix");
  const std::size_t rows = cost.shape()[0];
  const std::size_t cols = cost.shape()[1];
  if (rows == 0) return {};
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw std::invalid_argument("assignment: non-finite cost");
  }
  if (cols == 0) return std::vector<std::size_t>(rows, kUnassigned);
  if (rows <= cols) {
    return HungarianRowsLeCols(rows, cols,
                               [&](std::size_t r, std::size_t c) { return cost.at(r, c); });
  }
  // More rows than columns: match every column to a row instead.
  const auto col_to_row = HungarianRowsLeCols(
      cols, rows, [&](std::size_t c, std::size_t r) { return cost.at(r, c); });
  std::vector<std::size_t> assignment(rows, kUnassigned);
  for (std::size_t c = 0; c < cols; ++c) assignment[col_to_row[c]] = c;
  return assignment;
}

double AssignmentCost(const TensorD& cost, const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] != kUnassigned) total += cost.at(r, assignment[r]);
  }
  return total;
}

}  // namespace imprintlab
