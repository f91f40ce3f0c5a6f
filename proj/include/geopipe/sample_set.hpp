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
#include <optional>
#include <utility>
#include <vector>

namespace geopipe {

/// A set of sample indices stored as sorted, disjoint, non-adjacent
/// half-open intervals.
class SampleSet {
 public:
  using Interval = std::pair<int, int>;

  SampleSet() = default;
  SampleSet(int lo, int hi) { add(lo, hi); }

  void add(int lo, int hi) {
    if (lo >= hi) return;
    std::vector<Interval> out;
    out.reserve(iv_.size() + 1);
    bool placed = false;
    for (const auto& [a, b] : iv_) {
      if (b < lo) {
        out.emplace_back(a, b);
      } else if (a > hi) {
        if (!placed) {
          out.emplace_back(lo, hi);
          placed = true;
        }
        out.emplace_back(a, b);
      } else {
        lo = std::min(lo, a);
        hi = std::max(hi, b);
      }
    }
    if (!placed) out.emplace_back(lo, hi);
    iv_ = std::move(out);
  }

  void remove(int lo, int hi) {
    if (lo >= hi) return;
    std::vector<Interval> out;
    out.reserve(iv_.size() + 1);
    for (const auto& [a, b] : iv_) {
      if (b <= lo || a >= hi) {
        out.emplace_back(a, b);
        continue;
      }
      if (a < lo) out.emplace_back(a, lo);
      if (b > hi) out.emplace_back(hi, b);
    }
    iv_ = std::move(out);
  }

  SampleSet intersect(const SampleSet& o) const {
    SampleSet r;
    std::size_t i = 0, j = 0;
    while (i < iv_.size() && j < o.iv_.size()) {
      const int lo = std::max(iv_[i].first, o.iv_[j].first);
      const int hi = std::min(iv_[i].second, o.iv_[j].second);
      if (lo < hi) r.iv_.emplace_back(lo, hi);
      if (iv_[i].second < o.iv_[j].second) {
        ++i;
      } else {
        ++j;
      }
    }
    return r;
  }

  SampleSet minus(const SampleSet& o) const {
    SampleSet r = *this;
    for (const auto& [a, b] : o.iv_) r.remove(a, b);
    return r;
  }

  bool contains(int lo, int hi) const {
    for (const auto& [a, b] : iv_) {
      if (a <= lo && hi <= b) return true;
    }
    return lo >= hi;
  }

  std::optional<Interval> front() const {
    if (iv_.empty()) return std::nullopt;
    return iv_.front();
  }

  int total() const {
    int n = 0;
    for (const auto& [a, b] : iv_) n += b - a;
    return n;
  }

  bool empty() const noexcept { return iv_.empty(); }
  const std::vector<Interval>& intervals() const noexcept { return iv_; }

  friend bool operator==(const SampleSet&, const SampleSet&) = default;

 private:
  std::vector<Interval> iv_;
};

}  // namespace geopipe
