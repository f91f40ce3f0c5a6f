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

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "geopipe/error.hpp"
#include "geopipe/timing.hpp"

namespace geopipe {

struct Breakpoint {
  double t_s = 0.0;
  double multiplier = 1.0;
  friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
};

/// Piecewise-constant bandwidth multipliers per inter-stage link. The
/// multiplier is 1 before the first breakpoint. A link without its own
/// breakpoints follows the all-links list, if one is set.
class NetworkTrace {
 public:
  static constexpr int kAllLinks = -1;

  void add(int link, double t_s, double multiplier) {
    if (link < kAllLinks) throw Error(Errc::InvalidTrace, "link ids must be >= 0");
    if (!(multiplier > 0.0) || !std::isfinite(multiplier)) {
      throw Error(Errc::InvalidTrace, "bandwidth multipliers must be positive and finite");
    }
    if (!(t_s >= 0.0) || !std::isfinite(t_s)) throw Error(Errc::InvalidTrace, "breakpoint times must be >= 0");
    auto& bps = links_[link];
    if (!bps.empty() && !(t_s > bps.back().t_s)) {
      throw Error(Errc::InvalidTrace, "breakpoints must be strictly increasing in time");
    }
    bps.push_back({t_s, multiplier});
  }

  bool constant() const noexcept { return links_.empty(); }
  const std::map<int, std::vector<Breakpoint>>& links() const noexcept { return links_; }

  const std::vector<Breakpoint>* breakpoints(std::size_t link) const {
    if (auto it = links_.find(static_cast<int>(link)); it != links_.end()) return &it->second;
    if (auto it = links_.find(kAllLinks); it != links_.end()) return &it->second;
    return nullptr;
  }

  double multiplier(std::size_t link, double t) const {
    const auto* bps = breakpoints(link);
    double m = 1.0;
    if (!bps) return m;
    for (const auto& bp : *bps) {
      if (bp.t_s > t) break;
      m = bp.multiplier;
    }
    return m;
  }

  double effective_bandwidth(std::size_t link, double base_bandwidth_Bps, double t) const {
    return base_bandwidth_Bps * multiplier(link, t);
  }

  /// Completion time of a transfer that starts at `start`: fixed latency, then
  /// the payload drains at the instantaneous bandwidth, split at breakpoints.
  double transfer_end(std::size_t link, const BoundaryLink& l, double start, double bytes) const {
    double t = start + l.latency_s;
    const auto* bps = breakpoints(link);
    if (!bps) return t + bytes / l.bandwidth_Bps;
    double remaining = bytes;
    while (true) {
      const double rate = effective_bandwidth(link, l.bandwidth_Bps, t);
      double next = std::numeric_limits<double>::infinity();
      for (const auto& bp : *bps) {
        if (bp.t_s > t) {
          next = bp.t_s;
          break;
        }
      }
      const double needed = remaining / rate;
      if (t + needed <= next) return t + needed;
      remaining -= rate * (next - t);
      t = next;
    }
  }

  friend bool operator==(const NetworkTrace&, const NetworkTrace&) = default;

 private:
  std::map<int, std::vector<Breakpoint>> links_;
};

}  // namespace geopipe
