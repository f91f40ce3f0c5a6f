/* Copyright 2026 The geopipe Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "geopipe/error.hpp"
#include "geopipe/plan.hpp"

namespace geopipe {

/// Largest-remainder apportionment of `total` units over `weights`. Every
/// share is raised to at least `min_each` by taking units from the largest
/// shares. Remainder ties go to the lower index.
inline std::vector<int> largest_remainder(int total, std::span<const double> weights, int min_each = 0) {
  const std::size_t n = weights.size();
  if (n == 0) throw Error(Errc::InfeasibleSplit, "no recipients");
  if (total < static_cast<int>(n) * min_each) throw Error(Errc::InfeasibleSplit, "not enough units to share");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw Error(Errc::InfeasibleSplit, "weights must have a positive sum");

  std::vector<int> share(n);
  std::vector<double> frac(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = total * weights[i] / sum;
    const double fl = std::floor(quota + 1e-9);
    share[i] = static_cast<int>(fl);
    frac[i] = quota - fl;
    assigned += share[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % n) {
    ++share[order[k]];
    ++assigned;
  }

  for (std::size_t i = 0; i < n; ++i) {
    while (share[i] < min_each) {
      auto donor = std::max_element(share.begin(), share.end());
      --*donor;
      ++share[i];
    }
  }
  return share;
}

/// Contiguous layer sub-ranges proportional to SG capacities, order kept.
inline std::vector<LayerRange> split_asymmetric_pp(LayerRange range, std::span<const double> capacities) {
  if (capacities.size() < 2) throw Error(Errc::InfeasibleSplit, "asymmetric PP needs at least two groups");
  if (static_cast<int>(capacities.size()) > range.size()) {
    throw Error(Errc::InfeasibleSplit, "more second-level groups than layers");
  }
  const auto counts = largest_remainder(range.size(), capacities, 1);
  std::vector<LayerRange> out;
  int at = range.begin;
  for (int c : counts) {
    out.push_back({at, at + c});
    at += c;
  }
  return out;
}

/// Data fractions proportional to unit capacities.
inline std::vector<double> split_asymmetric_dp(std::span<const double> capacities) {
  if (capacities.size() < 2) throw Error(Errc::InfeasibleSplit, "asymmetric DP needs at least two units");
  const double sum = std::accumulate(capacities.begin(), capacities.end(), 0.0);
  if (!(sum > 0.0)) throw Error(Errc::InfeasibleSplit, "capacities must have a positive sum");
  std::vector<double> f;
  f.reserve(capacities.size());
  for (double c : capacities) f.push_back(c / sum);
  return f;
}

struct Tile {
  std::size_t device = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double row_offset = 0.0;
  double rows = 0.0;  // extent along the first tensor dimension
  double col_offset = 0.0;
  double cols = 0.0;  // extent along the second tensor dimension
};

struct TileGrid {
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<double> row_shares;
  std::vector<double> col_shares;
  std::vector<Tile> tiles;  // one per device, in device order
};

/// Splits a [b, t] tensor over devices laid out column-major on an R x C grid
/// (R, C >= 2) whose capacity ratios factor as row_i * col_j.
inline TileGrid split_asymmetric_tp_dp(std::span<const double> capacities, double b, double t) {
  const std::size_t n = capacities.size();
  for (double c : capacities) {
    if (!(c > 0.0)) throw Error(Errc::Factorization, "capacities must be positive");
  }
  constexpr double kRelTol = 1e-9;
  for (std::size_t rows = 2; rows * 2 <= n; ++rows) {
    if (n % rows != 0) continue;
    const std::size_t cols = n / rows;
    auto at = [&](std::size_t i, std::size_t j) { return capacities[i + rows * j]; };
    bool rank_one = true;
    for (std::size_t i = 0; i < rows && rank_one; ++i) {
      for (std::size_t j = 0; j < cols && rank_one; ++j) {
        const double lhs = at(i, j) * at(0, 0);
        const double rhs = at(i, 0) * at(0, j);
        rank_one = std::abs(lhs - rhs) <= kRelTol * std::max(lhs, rhs);
      }
    }
    if (!rank_one) continue;

    TileGrid g;
    g.grid_rows = rows;
    g.grid_cols = cols;
    for (std::size_t i = 0; i < rows; ++i) g.row_shares.push_back(at(i, 0));
    for (std::size_t j = 0; j < cols; ++j) g.col_shares.push_back(at(0, j));
    const double row_sum = std::accumulate(g.row_shares.begin(), g.row_shares.end(), 0.0);
    const double col_sum = std::accumulate(g.col_shares.begin(), g.col_shares.end(), 0.0);
    for (auto& r : g.row_shares) r /= row_sum;
    for (auto& c : g.col_shares) c /= col_sum;

    g.tiles.resize(n);
    double col_at = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double row_at = 0.0;
      const double w = t * g.col_shares[j];
      for (std::size_t i = 0; i < rows; ++i) {
        const double h = b * g.row_shares[i];
        const std::size_t dev = i + rows * j;
        g.tiles[dev] = Tile{dev, i, j, row_at, h, col_at, w};
        row_at += h;
      }
      col_at += w;
    }
    return g;
  }
  throw Error(Errc::Factorization, "capacity ratios admit no rank-1 grid with at least 2x2 cells");
}

}  // namespace geopipe
