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
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "geopipe/costmodel.hpp"
#include "geopipe/error.hpp"
#include "geopipe/plan.hpp"
#include "geopipe/split.hpp"

namespace geopipe {

struct SearchConfig {
  int beam_width = 8;
  int max_iter = 20;
  std::uint64_t seed = 0;
  double bottleneck_factor = 1.25;  // AsymmetricPP rejected when a sub-stage exceeds this x mean
};

/// A first-level stage order plus interior layer cut points.
struct Candidate {
  std::vector<std::size_t> order;
  std::vector<int> cuts;  // strictly increasing, each in (0, layer count)
  double cost = std::numeric_limits<double>::quiet_NaN();

  bool evaluated() const noexcept { return cost == cost; }
  friend bool operator==(const Candidate& a, const Candidate& b) { return a.order == b.order && a.cuts == b.cuts; }
  friend bool operator<(const Candidate& a, const Candidate& b) {
    return std::tie(a.order, a.cuts) < std::tie(b.order, b.cuts);
  }
};

using Rng = std::mt19937_64;

namespace detail {

inline std::size_t pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(rng, i)]);
}

inline std::vector<int> proportional_cuts(const std::vector<std::size_t>& order, int layers,
                                          const DeviceHierarchy& h) {
  std::vector<double> caps;
  for (std::size_t fg : order) caps.push_back(h.first_level.at(fg).aggregate_capacity);
  const auto counts = largest_remainder(layers, caps, 1);
  std::vector<int> cuts;
  int at = 0;
  for (std::size_t k = 0; k + 1 < counts.size(); ++k) {
    at += counts[k];
    cuts.push_back(at);
  }
  return cuts;
}

inline bool cut_ok(const std::vector<int>& cuts, std::size_t j, int value, int layers) {
  const int lo = j == 0 ? 0 : cuts[j - 1];
  const int hi = j + 1 == cuts.size() ? layers : cuts[j + 1];
  return lo < value && value < hi;
}

}  // namespace detail

/// `l` candidates: random stage orders with capacity-proportional cuts; all
/// but the first get each cut jittered by -1, 0 or +1 where legal.
inline std::vector<Candidate> initial_candidates(const ModelSpec& model, const DeviceHierarchy& h, int l, Rng& rng) {
  const std::size_t groups = h.first_level.size();
  const int layers = static_cast<int>(model.layers.size());
  if (groups == 0) throw Error(Errc::EmptyCluster, "no first-level groups to plan over");
  if (static_cast<int>(groups) > layers) {
    throw Error(Errc::InfeasibleSplit, std::to_string(groups) + " groups cannot share " + std::to_string(layers) +
                                           " layers with at least one layer each");
  }
  if (l < 1) throw Error(Errc::InvalidPlan, "beam width must be >= 1");

  std::vector<Candidate> out;
  for (int k = 0; k < l; ++k) {
    Candidate c;
    c.order.resize(groups);
    std::iota(c.order.begin(), c.order.end(), std::size_t{0});
    detail::shuffle(c.order, rng);
    c.cuts = detail::proportional_cuts(c.order, layers, h);
    if (k > 0) {
      for (std::size_t j = 0; j < c.cuts.size(); ++j) {
        const int shifted = c.cuts[j] + static_cast<int>(detail::pick(rng, 3)) - 1;
        if (detail::cut_ok(c.cuts, j, shifted, layers)) c.cuts[j] = shifted;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Each candidate, one random stage transposition of it, and every legal
/// +-1 move of each cut. Duplicates are dropped, first occurrence wins.
inline std::vector<Candidate> expand_candidates(const std::vector<Candidate>& cands, int layers, Rng& rng) {
  if (cands.empty()) throw Error(Errc::InvalidPlan, "nothing to expand");
  std::vector<Candidate> out;
  std::set<Candidate> seen;
  auto emit = [&](Candidate c) {
    if (seen.insert(c).second) out.push_back(std::move(c));
  };
  for (const auto& c : cands) {
    emit(c);
    if (c.order.size() >= 2) {
      Candidate r = c;
      r.cost = std::numeric_limits<double>::quiet_NaN();
      const std::size_t i = detail::pick(rng, r.order.size());
      std::size_t j = detail::pick(rng, r.order.size() - 1);
      if (j >= i) ++j;
      std::swap(r.order[i], r.order[j]);
      emit(std::move(r));
    }
    for (std::size_t j = 0; j < c.cuts.size(); ++j) {
      for (int delta : {-1, +1}) {
        if (!detail::cut_ok(c.cuts, j, c.cuts[j] + delta, layers)) continue;
        Candidate s = c;
        s.cost = std::numeric_limits<double>::quiet_NaN();
        s.cuts[j] += delta;
        emit(std::move(s));
      }
    }
  }
  return out;
}

/// Picks the second-level layout of one stage: asymmetric PP unless a
/// sub-stage would bottleneck or SGs outnumber layers, then tensor+data
/// tiling over devices, then asymmetric data splitting.
inline IntraSplit choose_intra_split(std::size_t fg_index, LayerRange range, const CostContext& ctx,
                                     double bottleneck_factor = 1.25) {
  const auto& fg = ctx.fg(fg_index);
  const auto& sgs = ctx.sgs(fg_index);
  IntraSplit split;
  if (fg.members.size() < 2 || sgs.size() < 2) return split;

  std::vector<double> caps;
  for (const auto& sg : sgs) caps.push_back(sg.aggregate_capacity);
  const double cap_sum = std::accumulate(caps.begin(), caps.end(), 0.0);
  for (double c : caps) split.ratios.push_back(c / cap_sum);

  if (static_cast<int>(sgs.size()) <= range.size()) {
    const auto ranges = split_asymmetric_pp(range, caps);
    std::vector<double> times;
    for (std::size_t j = 0; j < ranges.size(); ++j) times.push_back(range_flops(ctx.model, ranges[j]) / caps[j]);
    const double mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    if (*std::max_element(times.begin(), times.end()) <= bottleneck_factor * mean) {
      split.kind = IntraSplitKind::AsymmetricPP;
      split.pp_ranges = ranges;
      return split;
    }
    split.note = "asymmetric PP bottlenecked; ";
  } else {
    split.note = "more second-level groups than layers; ";
  }

  std::vector<std::pair<double, std::size_t>> devices;
  for (std::size_t d : fg.members) devices.emplace_back(ctx.topology.p_c(d), d);
  std::sort(devices.begin(), devices.end());
  std::vector<double> device_caps;
  for (const auto& [c, d] : devices) device_caps.push_back(c);
  try {
    (void)split_asymmetric_tp_dp(device_caps, 1.0, 1.0);
    split.kind = IntraSplitKind::AsymmetricTPDP;
    split.ratios.clear();
    for (double c : device_caps) split.ratios.push_back(c / fg.aggregate_capacity);
    return split;
  } catch (const Error& e) {
    if (e.code() != Errc::Factorization) throw;
    split.note += "tensor tiling not factorizable; ";
  }

  split.kind = IntraSplitKind::AsymmetricDP;
  split.fractions = split_asymmetric_dp(caps);
  return split;
}

inline ParallelPlan plan_from_candidate(const Candidate& c, int batch, int microbatch, const CostContext& ctx,
                                        double bottleneck_factor = 1.25) {
  ParallelPlan p;
  p.batch = batch;
  p.microbatch = microbatch;
  int at = 0;
  for (std::size_t k = 0; k < c.order.size(); ++k) {
    const int end = k < c.cuts.size() ? c.cuts[k] : static_cast<int>(ctx.model.layers.size());
    StageAssignment st;
    st.fg = c.order[k];
    st.layers = {at, end};
    st.split = choose_intra_split(st.fg, st.layers, ctx, bottleneck_factor);
    p.stages.push_back(std::move(st));
    at = end;
  }
  return p;
}

struct BeamTrace {
  int batch = 0;
  int microbatch = 0;
  std::vector<double> best;  // incumbent plan cost after each round
};

struct SearchResult {
  ParallelPlan plan;
  CostBreakdown cost;
  double cost_per_sample = std::numeric_limits<double>::infinity();
  std::vector<BeamTrace> traces;
  std::vector<std::string> warnings;
  std::size_t evaluations = 0;
};

/// Plans across different batch sizes compare by iteration cost per sample.
inline double per_sample(double cost, int batch) { return cost / static_cast<double>(batch); }

/// Beam search over stage orders and cuts for every (batch, micro-batch)
/// pair; the cheapest plan per sample across all pairs wins.
inline SearchResult search_plan(const CostContext& ctx, const SearchConfig& cfg) {
  if (cfg.beam_width < 1 || cfg.max_iter < 1) throw Error(Errc::InvalidPlan, "beam width and max_iter must be >= 1");
  const int layers = static_cast<int>(ctx.model.layers.size());
  Rng rng(cfg.seed);
  SearchResult result;

  for (int b : ctx.model.batch_candidates) {
    for (int m : ctx.model.microbatch_candidates) {
      if (m <= 0 || b <= 0 || b % m != 0) {
        result.warnings.push_back("skipping batch " + std::to_string(b) + " / micro-batch " + std::to_string(m) +
                                  ": not an integer number of micro-batches");
        continue;
      }
      std::map<Candidate, double> cache;
      auto evaluate = [&](Candidate& c) {
        if (auto it = cache.find(c); it != cache.end()) {
          c.cost = it->second;
          return;
        }
        c.cost = plan_cost(plan_from_candidate(c, b, m, ctx, cfg.bottleneck_factor), ctx).plan_cost;
        cache.emplace(c, c.cost);
        ++result.evaluations;
      };
      auto rank = [](std::vector<Candidate>& v, std::size_t keep) {
        std::sort(v.begin(), v.end(), [](const Candidate& x, const Candidate& y) {
          if (x.cost != y.cost) return x.cost < y.cost;
          return x < y;
        });
        if (v.size() > keep) v.resize(keep);
      };

      BeamTrace trace{b, m, {}};
      auto beam = initial_candidates(ctx.model, ctx.hierarchy, cfg.beam_width, rng);
      for (auto& c : beam) evaluate(c);
      rank(beam, static_cast<std::size_t>(cfg.beam_width));
      for (int it = 0; it < cfg.max_iter; ++it) {
        beam = expand_candidates(beam, layers, rng);
        for (auto& c : beam) evaluate(c);
        rank(beam, static_cast<std::size_t>(cfg.beam_width));
        trace.best.push_back(beam.front().cost);
      }
      result.traces.push_back(trace);

      const Candidate& top = beam.front();
      if (!(top.cost < std::numeric_limits<double>::infinity())) {
        result.warnings.push_back("batch " + std::to_string(b) + " / micro-batch " + std::to_string(m) +
                                  ": every candidate violates memory limits");
        continue;
      }
      if (per_sample(top.cost, b) < result.cost_per_sample) {
        result.cost_per_sample = per_sample(top.cost, b);
        result.plan = plan_from_candidate(top, b, m, ctx, cfg.bottleneck_factor);
      }
    }
  }
  if (result.plan.stages.empty()) {
    std::string why = "no (batch, micro-batch) pair yields a feasible plan";
    for (const auto& w : result.warnings) why += "; " + w;
    throw Error(Errc::NoFeasiblePlan, why);
  }
  result.cost = plan_cost(result.plan, ctx);
  return result;
}

/// Enumerates every stage order, every cut placement and every (batch,
/// micro-batch) pair. Only usable on tiny instances.
inline SearchResult exhaustive_plan(const CostContext& ctx, double bottleneck_factor = 1.25) {
  const std::size_t groups = ctx.hierarchy.first_level.size();
  const int layers = static_cast<int>(ctx.model.layers.size());
  if (groups == 0) throw Error(Errc::EmptyCluster, "no first-level groups to plan over");
  if (static_cast<int>(groups) > layers) throw Error(Errc::InfeasibleSplit, "more groups than layers");

  SearchResult result;
  std::vector<std::vector<int>> cut_sets;
  std::vector<int> cuts;
  auto rec = [&](auto&& self, int from, std::size_t left) -> void {
    if (left == 0) {
      cut_sets.push_back(cuts);
      return;
    }
    for (int c = from; c <= layers - static_cast<int>(left); ++c) {
      cuts.push_back(c);
      self(self, c + 1, left - 1);
      cuts.pop_back();
    }
  };
  rec(rec, 1, groups - 1);

  for (int b : ctx.model.batch_candidates) {
    for (int m : ctx.model.microbatch_candidates) {
      if (m <= 0 || b % m != 0) continue;
      Candidate c;
      c.order.resize(groups);
      std::iota(c.order.begin(), c.order.end(), std::size_t{0});
      do {
        for (const auto& cs : cut_sets) {
          c.cuts = cs;
          const auto plan = plan_from_candidate(c, b, m, ctx, bottleneck_factor);
          const double cost = plan_cost(plan, ctx).plan_cost;
          ++result.evaluations;
          if (per_sample(cost, b) < result.cost_per_sample) {
            result.cost_per_sample = per_sample(cost, b);
            result.plan = plan;
          }
        }
      } while (std::next_permutation(c.order.begin(), c.order.end()));
    }
  }
  if (result.plan.stages.empty()) throw Error(Errc::NoFeasiblePlan, "no feasible plan: every candidate violates memory limits");
  result.cost = plan_cost(result.plan, ctx);
  return result;
}

}  // namespace geopipe
