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

// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "geopipe/adapter.hpp"
#include "geopipe/io.hpp"
#include "geopipe/planner.hpp"
#include "geopipe/schedule.hpp"
#include "geopipe/simulator.hpp"
#include "geopipe/split.hpp"

using namespace geopipe;
namespace gt = geopipe::testing;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(int n, const char* title, double limit_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(dt < limit_s, "runtime " + std::to_string(dt) + " s over " + std::to_string(limit_s) + " s");
  std::printf("%s criterion %d: %s (%.3f s)%s%s\n", o.ok ? "PASS" : "FAIL", n, title, dt, o.detail.empty() ? "" : " : ",
              o.detail.c_str());
  failures += !o.ok;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Random plan over a random cluster, intra splits chosen by the planner rules.
struct RandomPlan {
  gt::World w;
  ParallelPlan plan;
};

RandomPlan random_plan(gt::Rng& rng, int k) {
  RandomPlan r{gt::make(gt::random_cluster(rng, gt::uniform_int(rng, 2, 4)),
                        gt::random_model(rng, gt::uniform_int(rng, 4, 8), {64}, {4, 8})),
               {}};
  geopipe::Rng prng(k);
  const auto cands = initial_candidates(r.w.model, r.w.h, 4, prng);
  const auto& c = cands[static_cast<std::size_t>(gt::uniform_int(rng, 0, static_cast<int>(cands.size()) - 1))];
  r.plan = plan_from_candidate(c, 64, r.w.model.microbatch_candidates[k % 2], r.w.ctx());
  return r;
}

double ratio_on_off(const PipelineTiming& t, const NetworkTrace& tr, int iterations) {
  SimConfig cfg;
  cfg.iterations = iterations;
  const double on = simulate(t, Policy::ZbCompact, tr, true, cfg).throughput;
  const double off = simulate(t, Policy::ZbCompact, tr, false, cfg).throughput;
  return on / off;
}

}  // namespace

int main() {
  criterion(1, "schedule validity over 200 random instances", 10.0, [](Outcome& o) {
    gt::Rng rng(101);
    int checked = 0;
    for (int k = 0; k < 200; ++k) {
      PipelineTiming t;
      if (k % 2) {
        t = gt::random_timing(rng, k % 4 == 1);
      } else {
        const auto rp = random_plan(rng, k);
        t = derive_timing(rp.plan, rp.w.ctx());
      }
      const Policy p = kAllPolicies[k % 4];
      const bool async = k % 5 == 0;
      const auto s = generate_schedule(t, p, async, 1 + k % 3);
      const auto v = validate_schedule(s, t, async);
      o.require(v.empty(), "instance " + std::to_string(k) + " " + std::string(to_string(p)) + ": " +
                               (v.empty() ? "" : v[0].rule + " " + v[0].detail));
      // the naive checker has no async variant
      if (!async) {
        const auto naive = gt::naive_check(s, t);
        o.require(naive == gt::tally(v), "instance " + std::to_string(k) + ": naive checker disagrees");
        ++checked;
      }
    }
    o.require(checked >= 150, "too few naive cross-checks");
  });

  criterion(2, "slow-link fixture: compact < original <= 1F1B, stage 0 runs six forwards first", 1.0, [](Outcome& o) {
    const auto t = gt::slow_link_timing();
    const auto compact = generate_schedule(t, Policy::ZbCompact);
    const auto original = generate_schedule(t, Policy::ZbOriginal);
    const auto fused = generate_schedule(t, Policy::OneFOneB);
    o.require(compact.makespan < original.makespan,
              "compact " + fmt(compact.makespan) + " vs original " + fmt(original.makespan));
    o.require(original.makespan <= fused.makespan,
              "original " + fmt(original.makespan) + " vs 1F1B " + fmt(fused.makespan));
    int forwards = 0;
    for (const auto& op : compact.stages[0]) {
      if (op.kind == OpKind::WeightUpdate) break;
      forwards += op.kind == OpKind::Forward;
    }
    o.require(forwards == 6, std::to_string(forwards) + " forwards before the first weight update");
    for (const auto* s : {&compact, &original, &fused}) o.require(validate_schedule(*s, t).empty(), "invalid schedule");
  });

  criterion(3, "beam search within 1.05x of exhaustive, monotone trace", 60.0, [](Outcome& o) {
    gt::Rng rng(303);
    for (int k = 0; k < 12; ++k) {
      const bool two_b = k % 2;
      auto w = gt::make(gt::random_cluster(rng, gt::uniform_int(rng, 2, 4)),
                        gt::random_model(rng, gt::uniform_int(rng, 4, 8), two_b ? std::vector<int>{32, 64}
                                                                                 : std::vector<int>{64},
                                         two_b ? std::vector<int>{4, 8} : std::vector<int>{2, 4, 8, 16}));
      SearchConfig cfg;
      cfg.seed = static_cast<std::uint64_t>(k);
      const auto r = search_plan(w.ctx(), cfg);
      const double exact = exhaustive_plan(w.ctx()).cost_per_sample;
      const double brute = gt::oracle(w);
      o.require(std::abs(exact - brute) <= 1e-9 * brute, "exhaustive disagrees with brute force on " + std::to_string(k));
      o.require(r.cost_per_sample <= 1.05 * exact,
                "instance " + std::to_string(k) + ": " + fmt(r.cost_per_sample) + " vs " + fmt(exact));
      for (const auto& tr : r.traces)
        for (std::size_t i = 1; i < tr.best.size(); ++i)
          o.require(tr.best[i] <= tr.best[i - 1], "best-cost trace rises on " + std::to_string(k));
    }
  });

  criterion(4, "plan cost within 15% of simulated makespan on 25 random plans", 30.0, [](Outcome& o) {
    gt::Rng rng(404);
    double worst = 0;
    for (int k = 0; k < 25; ++k) {
      const auto rp = random_plan(rng, k);
      const double cost = plan_cost(rp.plan, rp.w.ctx()).plan_cost;
      SimConfig cfg;
      cfg.iterations = 1;
      cfg.warmup_iterations = 0;
      const auto rep = simulate(rp.plan, rp.w.ctx(), Policy::ZbCompact, NetworkTrace{}, false, cfg);
      const double err = std::abs(cost - rep.makespan) / rep.makespan;
      worst = std::max(worst, err);
      o.require(err <= 0.15, "plan " + std::to_string(k) + ": cost " + fmt(cost) + " makespan " + fmt(rep.makespan));
    }
    if (o.ok) o.detail = "worst relative error " + fmt(worst);
  });

  criterion(5, "twelve-device topology groups into 3 FGs with the expected SG pattern", 1.0, [](Outcome& o) {
    const auto topo = gt::topology_of(gt::regions_cluster());
    const auto fgs = group_first_level(topo);
    o.require(fgs.size() == 3, std::to_string(fgs.size()) + " first-level groups");
    if (fgs.size() != 3) return;
    std::vector<std::pair<int, int>> shape;  // (multi-device SGs, standalones)
    for (const auto& fg : fgs) {
      int multi = 0, single = 0;
      for (const auto& sg : group_second_level(fg, topo)) (sg.members.size() > 1 ? multi : single)++;
      shape.push_back({multi, single});
    }
    std::sort(shape.begin(), shape.end());
    const std::vector<std::pair<int, int>> want{{0, 2}, {1, 2}, {3, 0}};
    o.require(shape == want, "unexpected second-level pattern");
  });

  criterion(6, "adapter gain >= 1.2x under 40-60% drops, >= 0.9x on a constant trace", 10.0, [](Outcome& o) {
    const auto t = gt::fluctuation_timing();
    const int iterations = 12;
    std::string seen;
    for (double mult : {0.4, 0.5, 0.6}) {
      NetworkTrace tr;
      tr.add(NetworkTrace::kAllLinks, 60, mult);
      const double r = ratio_on_off(t, tr, iterations);
      seen += " drop" + fmt(mult) + "=" + fmt(r);
      o.require(r >= 1.2, "ratio " + fmt(r) + " at multiplier " + fmt(mult));
    }
    const double flat = ratio_on_off(t, NetworkTrace{}, iterations);
    seen += " constant=" + fmt(flat);
    o.require(flat >= 0.9, "constant-trace ratio " + fmt(flat));
    if (o.ok) o.detail = "ratios" + seen;
  });

  criterion(7, "conservation and bit-identical reruns over 100 adapter configs", 60.0, [](Outcome& o) {
    gt::Rng rng(707);
    for (int k = 0; k < 100; ++k) {
      PipelineTiming t;
      const int S = gt::uniform_int(rng, 2, 5);
      t.microbatch = 1 << gt::uniform_int(rng, 1, 5);
      t.batch = t.microbatch * gt::uniform_int(rng, 2, 6);
      for (int s = 0; s < S; ++s)
        t.stages.push_back({gt::uniform(rng, 0.3, 1.5), gt::uniform(rng, 0.3, 1.5), gt::uniform(rng, 0.3, 1.5),
                            gt::uniform(rng, 0, 0.2), gt::uniform(rng, 0, 0.1)});
      for (int s = 0; s + 1 < S; ++s)
        t.links.push_back({gt::uniform(rng, 0, 0.05), gt::uniform(rng, 0.2, 2.5), gt::uniform(rng, 0.5, 2)});
      NetworkTrace tr;
      const int link = rng() % 2 ? NetworkTrace::kAllLinks : gt::uniform_int(rng, 0, S - 2);
      std::vector<double> at(static_cast<std::size_t>(gt::uniform_int(rng, 0, 3)));
      for (auto& x : at) x = gt::uniform(rng, 0, 40);
      std::sort(at.begin(), at.end());
      for (double x : at) tr.add(link, x, gt::uniform(rng, 0.3, 1.6));
      SimConfig cfg;
      cfg.iterations = gt::uniform_int(rng, 1, 5);
      cfg.warmup_iterations = cfg.iterations > 1 ? 1 : 0;
      cfg.seed = rng();
      const Policy p = kAllPolicies[k % 4];
      const auto a = simulate(t, p, tr, true, cfg);
      const auto b = simulate(t, p, tr, true, cfg);
      o.require(io::to_json(a).dump() == io::to_json(b).dump(), "rerun differs on config " + std::to_string(k));
      const auto totals = sample_totals(a.schedule);
      for (int s = 0; s < S; ++s) {
        for (int i = 0; i < cfg.iterations; ++i) {
          o.require(totals.forward[s][i] == t.batch && totals.backward[s][i] == t.batch,
                    "sample totals off on config " + std::to_string(k));
        }
      }
      const auto v = validate_schedule(a.schedule, peak_timing(t, tr));
      o.require(v.empty(), "adapted schedule invalid on config " + std::to_string(k) + (v.empty() ? "" : ": " + v[0].rule + " " + v[0].detail));
    }
  });

  criterion(8, "split algebra examples, zero slack", 1.0, [](Outcome& o) {
    const std::vector<double> one_two{1, 2};
    const auto pp = split_asymmetric_pp({0, 6}, one_two);
    o.require(pp.size() == 2 && pp[0].begin == 0 && pp[0].end == 2 && pp[1].begin == 2 && pp[1].end == 6,
              "pipeline split is not 2+4");
    const auto dp = split_asymmetric_dp(one_two);
    o.require(std::abs(dp[0] - 1.0 / 3) < 1e-15 && std::abs(dp[1] - 2.0 / 3) < 1e-15, "data split is not 1/3, 2/3");
    const std::vector<double> caps{1, 2, 2, 4};
    const double b = 3, tcols = 3;
    const auto g = split_asymmetric_tp_dp(caps, b, tcols);
    const double want[4][2] = {{b / 3, tcols / 3}, {2 * b / 3, tcols / 3}, {b / 3, 2 * tcols / 3},
                               {2 * b / 3, 2 * tcols / 3}};
    o.require(g.tiles.size() == 4, "expected four tiles");
    double area = 0;
    for (std::size_t i = 0; i < g.tiles.size() && i < 4; ++i) {
      o.require(g.tiles[i].rows == want[i][0] && g.tiles[i].cols == want[i][1], "tile " + std::to_string(i));
      area += g.tiles[i].rows * g.tiles[i].cols;
    }
    o.require(area == b * tcols, "tiles leave slack");

    gt::Rng rng(808);
    for (int k = 0; k < 200; ++k) {
      const int n = gt::uniform_int(rng, 2, 6);
      std::vector<double> c(static_cast<std::size_t>(n));
      for (auto& x : c) x = gt::uniform(rng, 0.1, 10);
      const int begin = gt::uniform_int(rng, 0, 4), len = n + gt::uniform_int(rng, 0, 20);
      const auto r = split_asymmetric_pp({begin, begin + len}, c);
      bool tiled = r.front().begin == begin && r.back().end == begin + len;
      for (std::size_t s = 0; s + 1 < r.size(); ++s) tiled = tiled && r[s].end == r[s + 1].begin;
      o.require(tiled, "pipeline split leaves a gap");
      const auto f = split_asymmetric_dp(c);
      double sum = 0;
      for (double x : f) sum += x;
      o.require(std::abs(sum - 1) < 1e-12, "data fractions do not sum to one");
    }
  });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
