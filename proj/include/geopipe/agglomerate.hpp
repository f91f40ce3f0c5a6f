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
#include <cstddef>
#include <queue>
#include <vector>

namespace geopipe {

/// Greedy heap-driven agglomerative clustering over items 0..n-1.
///
/// Every item starts as a singleton cluster. Candidate cluster pairs sit in a
/// max-heap keyed by `score(a, b)`; ties pop the pair whose member lists are
/// lexicographically smallest. A popped pair is merged iff `accept(a, b)`
/// holds, otherwise it is dropped for good. After a merge, pairs between the
/// new cluster and every live cluster are pushed. Pairs that reference a
/// cluster consumed by an earlier merge are skipped. Only the surviving
/// top-level clusters are returned, each with sorted members, ordered by
/// smallest member.
template <class Score, class Accept>
std::vector<std::vector<std::size_t>> agglomerate(std::size_t n, Score score, Accept accept) {
  using Members = std::vector<std::size_t>;

  std::vector<Members> clusters;
  std::vector<bool> alive;
  clusters.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    clusters.push_back({i});
    alive.push_back(true);
  }

  struct Candidate {
    double score;
    std::size_t a;  // a's members compare lexicographically below b's
    std::size_t b;
  };
  auto worse = [&](const Candidate& x, const Candidate& y) {
    if (x.score != y.score) return x.score < y.score;
    if (clusters[x.a] != clusters[y.a]) return clusters[x.a] > clusters[y.a];
    return clusters[x.b] > clusters[y.b];
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);

  auto push = [&](std::size_t i, std::size_t j) {
    if (clusters[j] < clusters[i]) std::swap(i, j);
    heap.push({score(clusters[i], clusters[j]), i, j});
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) push(i, j);
  }

  while (!heap.empty()) {
    const Candidate top = heap.top();
    heap.pop();
    if (!alive[top.a] || !alive[top.b]) continue;
    if (!accept(clusters[top.a], clusters[top.b])) continue;

    Members merged = clusters[top.a];
    merged.insert(merged.end(), clusters[top.b].begin(), clusters[top.b].end());
    std::sort(merged.begin(), merged.end());
    alive[top.a] = alive[top.b] = false;
    clusters.push_back(std::move(merged));
    alive.push_back(true);

    const std::size_t fresh = clusters.size() - 1;
    for (std::size_t k = 0; k < fresh; ++k) {
      if (alive[k]) push(k, fresh);
    }
  }

  std::vector<Members> out;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    if (alive[k]) out.push_back(clusters[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace geopipe
