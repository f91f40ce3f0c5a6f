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
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "geopipe/engine.hpp"
#include "geopipe/error.hpp"
#include "geopipe/timing.hpp"

namespace geopipe {

/// One iteration of list scheduling on a static network.
inline Schedule generate_schedule(const PipelineTiming& timing, Policy policy, bool async_iterations = false,
                                  int iterations = 1) {
  detail::PipelineEngine engine(timing, EngineConfig{policy, iterations, async_iterations}, nullptr, nullptr);
  return engine.run();
}

struct Violation {
  std::string rule;
  int stage = 0;
  int iteration = 0;
  std::string detail;
};

namespace detail {

inline bool before(double a, double b) {
  // a must not exceed b beyond rounding noise
  return a <= b + 1e-9 * std::max(1.0, std::abs(b));
}

inline bool intersects(const PipeOp& a, const PipeOp& b) {
  return a.sample_begin < b.sample_end && b.sample_begin < a.sample_end;
}

inline std::string describe(const PipeOp& op) {
  std::string s(to_string(op.kind));
  if (op.microbatch >= 0) s += std::to_string(op.microbatch);
  return s + "@s" + std::to_string(op.stage) + "i" + std::to_string(op.iteration) + "[" +
         std::to_string(op.sample_begin) + "," + std::to_string(op.sample_end) + ")";
}

}  // namespace detail

/// Checks precedence, per-stage exclusivity and totality against static
/// link timing. Transfers are lower-bounded by latency + bytes / bandwidth.
/// Never throws on a malformed schedule; every broken rule is reported.
inline std::vector<Violation> validate_schedule(const Schedule& sched, const PipelineTiming& timing,
                                                bool async_iterations = false) {
  std::vector<Violation> out;
  const int S = static_cast<int>(sched.stages.size());
  const int batch = sched.batch;
  if (S != static_cast<int>(timing.stage_count())) {
    out.push_back({"stage-count", 0, 0, "schedule and timing disagree on the number of stages"});
    return out;
  }

  using Key = std::tuple<int, int, OpKind>;  // stage, iteration, kind
  std::map<Key, std::vector<const PipeOp*>> groups;
  for (const auto& ops : sched.stages) {
    for (const auto& op : ops) groups[{op.stage, op.iteration, op.kind}].push_back(&op);
  }
  auto group = [&](int s, int i, OpKind k) -> const std::vector<const PipeOp*>& {
    static const std::vector<const PipeOp*> none;
    auto it = groups.find({s, i, k});
    return it == groups.end() ? none : it->second;
  };

  auto add = [&](const char* rule, const PipeOp& op, std::string detail) {
    out.push_back({rule, op.stage, op.iteration, detail::describe(op) + ": " + detail});
  };

  // Every dependency intersecting `op` must finish (plus `lag`) before op starts,
  // and the dependencies together must cover op's samples.
  auto depends = [&](const PipeOp& op, const std::vector<const PipeOp*>& deps, auto lag, const char* rule) {
    SampleSet covered;
    for (const PipeOp* d : deps) {
      if (!detail::intersects(op, *d)) continue;
      covered.add(d->sample_begin, d->sample_end);
      if (!detail::before(d->end + lag(*d), op.start)) add(rule, op, "starts before " + detail::describe(*d));
    }
    if (!covered.contains(op.sample_begin, op.sample_end)) add("missing-dependency", op, rule);
  };
  auto no_lag = [](const PipeOp&) { return 0.0; };

  for (int s = 0; s < S; ++s) {
    const auto& ops = sched.stages[s];
    for (const auto& op : ops) {
      if (!(op.end > op.start) && !(op.kind == OpKind::WeightSync || op.kind == OpKind::OptimizerStep)) {
        add("nonpositive-duration", op, "end must follow start");
      }
      const bool sample_op =
          op.kind == OpKind::Forward || op.kind == OpKind::Backward || op.kind == OpKind::WeightUpdate;
      if (sample_op && op.microbatch < 0) add("missing-microbatch", op, "F/B/W need a micro-batch id");
    }

    // Exclusivity: count every overlapping pair.
    std::vector<const PipeOp*> by_start;
    for (const auto& op : ops) by_start.push_back(&op);
    std::stable_sort(by_start.begin(), by_start.end(),
                     [](const PipeOp* a, const PipeOp* b) { return a->start < b->start; });
    for (std::size_t a = 0; a < by_start.size(); ++a) {
      for (std::size_t b = a + 1; b < by_start.size(); ++b) {
        if (detail::before(by_start[a]->end, by_start[b]->start)) break;
        if (detail::before(by_start[b]->end, by_start[a]->start)) continue;  // zero-length op at a's start
        add("overlap", *by_start[b], "overlaps " + detail::describe(*by_start[a]));
      }
    }
  }

  for (int i = 0; i < sched.iterations; ++i) {
    for (int s = 0; s < S; ++s) {
      for (OpKind k : {OpKind::Forward, OpKind::Backward, OpKind::WeightUpdate}) {
        // Totality: each sample exactly once.
        const auto& g = group(s, i, k);
        SampleSet seen;
        int total = 0;
        for (const PipeOp* op : g) {
          total += op->size();
          seen.add(op->sample_begin, op->sample_end);
        }
        if (total != batch || !seen.contains(0, batch)) {
          out.push_back({"totality", s, i, std::string(to_string(k)) + " ops do not cover the batch exactly once"});
        }
      }
      for (OpKind k : {OpKind::WeightSync, OpKind::OptimizerStep}) {
        if (group(s, i, k).size() != 1) {
          out.push_back({"totality", s, i, "expected exactly one " + std::string(to_string(k))});
        }
      }

      for (const PipeOp* op : group(s, i, OpKind::Forward)) {
        if (s > 0) {
          auto lag = [&](const PipeOp& d) { return timing.transfer_time(s - 1, d.size()); };
          depends(*op, group(s - 1, i, OpKind::Forward), lag, "activation");
        }
        if (i > 0 && !async_iterations) {
          for (const PipeOp* opt : group(s, i - 1, OpKind::OptimizerStep)) {
            if (!detail::before(opt->end, op->start)) add("iteration-order", *op, "starts before the previous optimizer step");
          }
        }
      }
      for (const PipeOp* op : group(s, i, OpKind::Backward)) {
        depends(*op, group(s, i, OpKind::Forward), no_lag, "forward-before-backward");
        if (s + 1 < S) {
          auto lag = [&](const PipeOp& d) { return timing.transfer_time(s, d.size()); };
          depends(*op, group(s + 1, i, OpKind::Backward), lag, "gradient");
        }
      }
      for (const PipeOp* op : group(s, i, OpKind::WeightUpdate)) {
        depends(*op, group(s, i, OpKind::Backward), no_lag, "backward-before-weight");
      }
      for (const PipeOp* sync : group(s, i, OpKind::WeightSync)) {
        for (const PipeOp* w : group(s, i, OpKind::WeightUpdate)) {
          if (!detail::before(w->end, sync->start)) add("sync-after-weights", *sync, "starts before " + detail::describe(*w));
        }
      }
      for (const PipeOp* opt : group(s, i, OpKind::OptimizerStep)) {
        for (const PipeOp* w : group(s, i, OpKind::WeightUpdate)) {
          if (!detail::before(w->end, opt->start)) add("optimizer-after-weights", *opt, "starts before " + detail::describe(*w));
        }
        for (const PipeOp* sync : group(s, i, OpKind::WeightSync)) {
          if (!detail::before(sync->end, opt->start)) add("optimizer-after-sync", *opt, "starts before the weight sync");
        }
      }
    }
  }
  return out;
}

/// Idle share of the makespan per stage.
inline std::vector<double> bubble_fraction(const Schedule& sched) {
  if (!(sched.makespan > 0)) throw Error(Errc::InvalidTiming, "bubble fraction needs a positive makespan");
  std::vector<double> f;
  for (const auto& ops : sched.stages) {
    double busy = 0.0;
    for (const auto& op : ops) busy += op.duration();
    f.push_back(std::clamp((sched.makespan - busy) / sched.makespan, 0.0, 1.0));
  }
  return f;
}

inline double mean_bubble_fraction(const Schedule& sched) {
  const auto f = bubble_fraction(sched);
  double sum = 0.0;
  for (double x : f) sum += x;
  return f.empty() ? 0.0 : sum / static_cast<double>(f.size());
}

}  // namespace geopipe
