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

#include <cstddef>
#include <vector>

#include "geopipe/error.hpp"

namespace geopipe {

/// Compute durations for one micro-batch of the base size.
struct StageTiming {
  double fwd_s = 0.0;
  double bwd_s = 0.0;  // input gradient
  double wgt_s = 0.0;  // weight gradient
  double sync_s = 0.0;
  double optimizer_s = 0.0;
};

/// The link between stage i and i+1. Activations and gradients have the
/// same size, so both directions share these parameters.
struct BoundaryLink {
  double latency_s = 0.0;
  double bytes = 0.0;  // per base micro-batch
  double bandwidth_Bps = 1.0;
};

struct PipelineTiming {
  int batch = 0;
  int microbatch = 0;  // base micro-batch size
  std::vector<StageTiming> stages;
  std::vector<BoundaryLink> links;  // stages.size() - 1 entries

  std::size_t stage_count() const noexcept { return stages.size(); }
  int micro_count() const noexcept { return microbatch > 0 ? batch / microbatch : 0; }

  double scale(int samples) const noexcept { return static_cast<double>(samples) / microbatch; }

  double bytes(std::size_t boundary, int samples) const { return links.at(boundary).bytes * scale(samples); }

  /// Transfer time at a constant bandwidth multiplier.
  double transfer_time(std::size_t boundary, int samples, double multiplier = 1.0) const {
    const auto& l = links.at(boundary);
    return l.latency_s + l.bytes * scale(samples) / (l.bandwidth_Bps * multiplier);
  }
};

inline void validate_timing(const PipelineTiming& t) {
  if (t.stages.empty()) throw Error(Errc::InvalidTiming, "no stages");
  if (t.links.size() + 1 != t.stages.size()) {
    throw Error(Errc::InvalidTiming, "expected one boundary link per adjacent stage pair");
  }
  if (t.microbatch <= 0 || t.batch <= 0 || t.batch % t.microbatch != 0) {
    throw Error(Errc::InvalidTiming, "batch must be a positive multiple of the micro-batch size");
  }
  for (const auto& s : t.stages) {
    if (!(s.fwd_s > 0) || !(s.bwd_s > 0) || !(s.wgt_s > 0) || s.sync_s < 0 || s.optimizer_s < 0) {
      throw Error(Errc::InvalidTiming, "compute durations must be positive");
    }
  }
  for (const auto& l : t.links) {
    if (l.latency_s < 0 || l.bytes < 0 || !(l.bandwidth_Bps > 0)) {
      throw Error(Errc::InvalidTiming, "links need non-negative latency and bytes, positive bandwidth");
    }
  }
}

}  // namespace geopipe
