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
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geopipe/error.hpp"
#include "geopipe/grouping.hpp"
#include "geopipe/plan.hpp"
#include "geopipe/profiling.hpp"
#include "geopipe/timing.hpp"

namespace geopipe {

/// Everything a plan is evaluated against.
struct CostContext {
  const ModelSpec& model;
  const ClusterTopology& topology;
  const DeviceHierarchy& hierarchy;

  const FirstLevelGroup& fg(std::size_t i) const { return hierarchy.first_level.at(i); }
  const std::vector<SecondLevelGroup>& sgs(std::size_t i) const { return hierarchy.second_level.at(i); }
};

struct StageCost {
  double fill_s = 0.0;
  double run_s = 0.0;
  double residual_s = 0.0;
  double collective_s = 0.0;
  double total_s = 0.0;
  double compute_s = 0.0;   // t^c, one micro-batch
  double transfer_s = 0.0;  // activation transfer to the next stage, 0 for the last
};

struct CostBreakdown {
  std::vector<StageCost> stages;
  double plan_cost = 0.0;
  std::vector<std::string> warnings;

  bool feasible() const noexcept { return plan_cost < std::numeric_limits<double>::infinity(); }
};

/// Inputs to the per-stage cost formula, all for one base micro-batch.
struct StageTerms {
  double compute_s = 0.0;
  double transfer_s = 0.0;
  double collective_s = 0.0;
};

inline double residual_latency(double t_comm, double t_lap) { return std::max(0.0, t_comm - t_lap); }

/// Stage s pays the fill and residual terms of every predecessor, its own
/// run term, and its collective term.
inline StageCost stage_cost(std::span<const StageTerms> terms, std::size_t s, int micro_count) {
  StageCost c;
  for (std::size_t i = 0; i < s; ++i) {
    c.fill_s += terms[i].compute_s + terms[i].transfer_s;
    c.residual_s += residual_latency(terms[i].transfer_s, terms[i + 1].compute_s);
  }
  c.compute_s = terms[s].compute_s;
  c.transfer_s = terms[s].transfer_s;
  c.run_s = micro_count * terms[s].compute_s;
  c.collective_s = terms[s].collective_s;
  c.total_s = c.fill_s + c.run_s + c.residual_s + c.collective_s;
  return c;
}

inline CostBreakdown evaluate_cost(std::span<const StageTerms> terms, int micro_count) {
  CostBreakdown b;
  for (std::size_t s = 0; s < terms.size(); ++s) {
    b.stages.push_back(stage_cost(terms, s, micro_count));
    b.plan_cost = std::max(b.plan_cost, b.stages.back().total_s);
  }
  return b;
}

inline double range_flops(const ModelSpec& model, LayerRange r) {
  double f = 0.0;
  for (int l = r.begin; l < r.end; ++l) f += model.layers.at(l).total_flops();
  return f;
}

inline double range_params(const ModelSpec& model, LayerRange r) {
  double p = 0.0;
  for (int l = r.begin; l < r.end; ++l) p += model.layers.at(l).param_bytes;
  return p;
}

/// Capacity seen by one stage. Data and tensor splits pool every SG; an
/// asymmetric PP split runs at the pace of its slowest sub-stage.
inline double effective_capacity(const StageAssignment& st, const CostContext& ctx) {
  const auto& fg = ctx.fg(st.fg);
  double cap = fg.aggregate_capacity;
  if (st.split.kind == IntraSplitKind::AsymmetricPP) {
    const auto& sgs = ctx.sgs(st.fg);
    if (st.split.pp_ranges.size() != sgs.size()) {
      throw Error(Errc::InvalidPlan, "asymmetric PP split of " + fg.id + " does not match its SG count");
    }
    double slowest = 0.0;
    for (std::size_t j = 0; j < sgs.size(); ++j) {
      if (!(sgs[j].aggregate_capacity > 0)) throw Error(Errc::DegenerateGroup, sgs[j].id + " has no capacity");
      slowest = std::max(slowest, range_flops(ctx.model, st.split.pp_ranges[j]) / sgs[j].aggregate_capacity);
    }
    cap = slowest > 0 ? range_flops(ctx.model, st.layers) / slowest : 0.0;
  }
  if (!(cap > 0)) throw Error(Errc::DegenerateGroup, fg.id + " has zero compute capacity");
  return cap;
}

/// t^c: compute time of one micro-batch on stage s.
inline double stage_compute_time(const ParallelPlan& plan, std::size_t s, const CostContext& ctx) {
  const auto& st = plan.stages.at(s);
  return plan.microbatch * range_flops(ctx.model, st.layers) / effective_capacity(st, ctx);
}

/// The cross-group device pair with the lowest p_t; ties go to the lowest indices.
inline std::pair<std::size_t, std::size_t> gateway_pair(const FirstLevelGroup& a, const FirstLevelGroup& b,
                                                        const ClusterTopology& topo) {
  std::pair<std::size_t, std::size_t> best{a.members.front(), b.members.front()};
  double best_pt = std::numeric_limits<double>::infinity();
  for (std::size_t u : a.members) {
    for (std::size_t v : b.members) {
      const double pt = topo.p_t(u, v);
      if (pt < best_pt) {
        best_pt = pt;
        best = {u, v};
      }
    }
  }
  return best;
}

inline BoundaryLink boundary_link(const ParallelPlan& plan, std::size_t s, const CostContext& ctx) {
  const auto& from = plan.stages.at(s);
  const auto& to = plan.stages.at(s + 1);
  const auto [u, v] = gateway_pair(ctx.fg(from.fg), ctx.fg(to.fg), ctx.topology);
  const auto& link = ctx.topology.link(u, v);
  const double bytes = ctx.model.layers.at(from.layers.end - 1).activation_out_bytes * plan.microbatch;
  return {link.latency_s, bytes, link.bandwidth_Bps};
}

inline double boundary_transfer_time(const ParallelPlan& plan, std::size_t s, const CostContext& ctx) {
  const auto l = boundary_link(plan, s, ctx);
  return l.latency_s + l.bytes / l.bandwidth_Bps;
}

/// AL = V / min intra-group bandwidth. Singleton groups never communicate.
inline double intra_group_comm(double volume_bytes, const FirstLevelGroup& fg) {
  if (volume_bytes <= 0 || fg.members.size() < 2) return 0.0;
  const double bw = fg.min_intra_bandwidth.value_or(0.0);
  if (!(bw > 0)) throw Error(Errc::InvalidTopology, fg.id + " has a zero-bandwidth internal link");
  return volume_bytes / bw;
}

/// Gradient ring volume (2x stage parameters) plus the boundary activation
/// for tensor-split stages.
inline double collective_volume(const ParallelPlan& plan, std::size_t s, const CostContext& ctx) {
  const auto& st = plan.stages.at(s);
  if (ctx.fg(st.fg).members.size() < 2) return 0.0;
  double v = 2.0 * range_params(ctx.model, st.layers);
  if (st.split.kind == IntraSplitKind::AsymmetricTPDP) {
    v += ctx.model.layers.at(st.layers.end - 1).activation_out_bytes * plan.microbatch;
  }
  return v;
}

inline std::vector<StageTerms> stage_terms(const ParallelPlan& plan, const CostContext& ctx) {
  std::vector<StageTerms> terms;
  terms.reserve(plan.stages.size());
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    StageTerms t;
    t.compute_s = stage_compute_time(plan, s, ctx);
    t.transfer_s = s + 1 < plan.stages.size() ? boundary_transfer_time(plan, s, ctx) : 0.0;
    t.collective_s = intra_group_comm(collective_volume(plan, s, ctx), ctx.fg(plan.stages[s].fg));
    terms.push_back(t);
  }
  return terms;
}

inline std::vector<std::string> memory_warnings(const ParallelPlan& plan, const CostContext& ctx) {
  std::vector<std::string> w;
  for (const auto& st : plan.stages) {
    const auto& fg = ctx.fg(st.fg);
    double memory = 0.0;
    for (std::size_t d : fg.members) memory += static_cast<double>(ctx.topology.device(d).spec.memory_bytes);
    const double params = range_params(ctx.model, st.layers);
    if (params > memory) {
      w.push_back(fg.id + " holds " + std::to_string(params) + " parameter bytes but has only " +
                  std::to_string(memory) + " bytes of memory");
    }
  }
  return w;
}

/// Full evaluation. Memory-infeasible plans keep their breakdown but cost +inf.
inline CostBreakdown plan_cost(const ParallelPlan& plan, const CostContext& ctx) {
  validate_plan(plan, ctx.model.layers.size(), ctx.hierarchy.first_level.size());
  const auto terms = stage_terms(plan, ctx);
  CostBreakdown b = evaluate_cost(terms, plan.micro_count());
  b.warnings = memory_warnings(plan, ctx);
  if (!b.warnings.empty()) b.plan_cost = std::numeric_limits<double>::infinity();
  return b;
}

/// Per-stage F/B/W durations and boundary links for the schedule engine. The
/// weight sync duration equals the collective term so both views agree.
inline PipelineTiming derive_timing(const ParallelPlan& plan, const CostContext& ctx) {
  validate_plan(plan, ctx.model.layers.size(), ctx.hierarchy.first_level.size());
  PipelineTiming t;
  t.batch = plan.batch;
  t.microbatch = plan.microbatch;
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& st = plan.stages[s];
    const double cap = effective_capacity(st, ctx);
    double fwd = 0, bwd = 0, wgt = 0;
    for (int l = st.layers.begin; l < st.layers.end; ++l) {
      fwd += ctx.model.layers[l].fwd_flops;
      bwd += ctx.model.layers[l].bwd_input_flops;
      wgt += ctx.model.layers[l].bwd_weight_flops;
    }
    StageTiming timing;
    timing.fwd_s = plan.microbatch * fwd / cap;
    timing.bwd_s = plan.microbatch * bwd / cap;
    timing.wgt_s = plan.microbatch * wgt / cap;
    timing.sync_s = intra_group_comm(collective_volume(plan, s, ctx), ctx.fg(st.fg));
    timing.optimizer_s = ctx.model.optimizer_s;
    t.stages.push_back(timing);
    if (s + 1 < plan.stages.size()) t.links.push_back(boundary_link(plan, s, ctx));
  }
  return t;
}

}  // namespace geopipe
