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
#include <cstdint>
#include <optional>
#include <vector>

#include "geopipe/adapter.hpp"
#include "geopipe/costmodel.hpp"
#include "geopipe/engine.hpp"
#include "geopipe/schedule.hpp"
#include "geopipe/timing.hpp"
#include "geopipe/trace.hpp"

namespace geopipe {

struct SimConfig {
  int iterations = 3;
  int warmup_iterations = 1;  // excluded from throughput
  bool async_iterations = false;
  std::uint64_t seed = 0;
  AdapterConfig adapter;
};

struct SimReport {
  Policy policy = Policy::ZbCompact;
  bool adapter_enabled = false;
  std::uint64_t seed = 0;
  double makespan = 0.0;
  double throughput = 0.0;  // samples per second over the measured iterations
  double measured_samples = 0.0;
  double measured_seconds = 0.0;
  std::vector<double> bubble;
  std::vector<AdapterAction> actions;
  Schedule schedule;

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

/// Runs `cfg.iterations` training iterations on the event engine. With an
/// empty trace and the adapter off this is exactly generate_schedule.
inline SimReport simulate(const PipelineTiming& timing, Policy policy, const NetworkTrace& trace,
                          bool adapter_enabled, const SimConfig& cfg = {}) {
  std::optional<Adapter> adapter;
  if (adapter_enabled) adapter.emplace(timing, cfg.adapter, cfg.iterations);

  detail::PipelineEngine engine(timing, EngineConfig{policy, cfg.iterations, cfg.async_iterations}, &trace,
                                adapter ? &*adapter : nullptr);
  SimReport r;
  r.policy = policy;
  r.adapter_enabled = adapter_enabled;
  r.seed = cfg.seed;
  r.schedule = engine.run();
  r.makespan = r.schedule.makespan;
  if (adapter) r.actions = adapter->actions();

  const int warm = std::clamp(cfg.warmup_iterations, 0, cfg.iterations - 1);
  const double t0 = warm > 0 ? r.schedule.iteration_end[warm - 1] : 0.0;
  r.measured_samples = static_cast<double>(cfg.iterations - warm) * timing.batch;
  r.measured_seconds = r.makespan - t0;
  r.throughput = r.measured_seconds > 0 ? r.measured_samples / r.measured_seconds : 0.0;
  r.bubble = bubble_fraction(r.schedule);
  return r;
}

inline SimReport simulate(const ParallelPlan& plan, const CostContext& ctx, Policy policy, const NetworkTrace& trace,
                          bool adapter_enabled, const SimConfig& cfg = {}) {
  const PipelineTiming timing = derive_timing(plan, ctx);
  return simulate(timing, policy, trace, adapter_enabled, cfg);
}

/// Timing with every link at its peak bandwidth under `trace`. Transfer times
/// from this are lower bounds for any run on the trace, so it is the timing
/// to hand validate_schedule for simulated schedules.
inline PipelineTiming peak_timing(PipelineTiming timing, const NetworkTrace& trace) {
  for (std::size_t k = 0; k < timing.links.size(); ++k) {
    double peak = 1.0;
    if (const auto* bps = trace.breakpoints(k))
      for (const auto& bp : *bps) peak = std::max(peak, bp.multiplier);
    timing.links[k].bandwidth_Bps *= peak;
  }
  return timing;
}

/// Samples forwarded and backwarded per (stage, iteration).
struct SampleTotals {
  std::vector<std::vector<int>> forward;
  std::vector<std::vector<int>> backward;
};

inline SampleTotals sample_totals(const Schedule& sched) {
  SampleTotals t;
  t.forward.assign(sched.stages.size(), std::vector<int>(sched.iterations, 0));
  t.backward = t.forward;
  for (const auto& ops : sched.stages) {
    for (const auto& op : ops) {
      if (op.kind == OpKind::Forward) t.forward[op.stage][op.iteration] += op.size();
      if (op.kind == OpKind::Backward) t.backward[op.stage][op.iteration] += op.size();
    }
  }
  return t;
}

}  // namespace geopipe
