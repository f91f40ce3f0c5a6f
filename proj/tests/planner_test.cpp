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

#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "geopipe/planner.hpp"

using namespace geopipe;
namespace gt = geopipe::testing;
using gt::make, gt::oracle, gt::World;

TEST(InitialCandidates, SingleGroup) {
  gt::Rng g(1);
  auto w = make(gt::clique_cluster({2}, {1, 1}), gt::random_model(g, 5));
  Rng rng(0);
  auto c = initial_candidates(w.model, w.h, 3, rng);
  ASSERT_EQ(c.size(), 3u);
  for (const auto& x : c) {
    EXPECT_EQ(x.order, std::vector<std::size_t>{0});
    EXPECT_TRUE(x.cuts.empty());
  }
  auto r = search_plan(w.ctx(), {});
  ASSERT_EQ(r.plan.stages.size(), 1u);
  EXPECT_EQ(r.plan.stages[0].layers, (LayerRange{0, 5}));
}

TEST(InitialCandidates, ProportionalCuts) {
  gt::Rng g(2);
  auto w = make(gt::clique_cluster({2, 2}, {0.5, 0.5, 1.5, 1.5}), gt::random_model(g, 8));
  Rng rng(5);
  ASSERT_EQ(w.h.first_level.size(), 2u);
  auto c = initial_candidates(w.model, w.h, 1, rng).front();
  const int first = c.cuts[0];
  const std::size_t first_fg = c.order[0];
  EXPECT_EQ(first_fg == 0 ? first : 8 - first, 2);
}

TEST(InitialCandidates, ExactCountAndReproducible) {
  gt::Rng g(3);
  auto w = make(gt::random_cluster(g, 3), gt::random_model(g, 8));
  Rng a(42), b(42);
  auto x = initial_candidates(w.model, w.h, 4, a);
  auto y = initial_candidates(w.model, w.h, 4, b);
  ASSERT_EQ(x.size(), 4u);
  EXPECT_EQ(x, y);
}

TEST(InitialCandidates, MoreGroupsThanLayers) {
  gt::Rng g(4);
  auto w = make(gt::clique_cluster({2, 2, 2}, {1, 1, 1, 1, 1, 1}), gt::random_model(g, 2));
  Rng rng(0);
  try {
    initial_candidates(w.model, w.h, 2, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InfeasibleSplit);
  }
}

TEST(ExpandCandidates, Enumeration) {
  Rng rng(0);
  Candidate c{{0, 1}, {3}};
  EXPECT_EQ(expand_candidates({c}, 6, rng).size(), 4u);
  Candidate edge{{0, 1}, {1}};
  auto e = expand_candidates({edge}, 6, rng);
  EXPECT_EQ(e.size(), 3u);
  for (const auto& x : e) EXPECT_GE(x.cuts[0], 1);
  Candidate single{{0}, {}};
  EXPECT_EQ(expand_candidates({single}, 6, rng).size(), 1u);
  EXPECT_EQ(expand_candidates({c, c}, 6, rng).front(), c);
}

TEST(ChooseIntraSplit, Strategies) {
  // two SGs of capacity 1 and 2 over 6 layers: PP 2+4
  gt::Rng g(1);
  auto w = make(gt::clique_cluster({2}, {1, 2}), gt::random_model(g, 6));
  for (auto& l : w.model.layers) l = {1, 1, 1, 1, 1};
  auto s = choose_intra_split(0, {0, 6}, w.ctx());
  EXPECT_EQ(s.kind, IntraSplitKind::AsymmetricPP);
  ASSERT_EQ(s.pp_ranges.size(), 2u);
  EXPECT_EQ(s.pp_ranges[0].size() + s.pp_ranges[1].size(), 6);
  EXPECT_EQ(std::min(s.pp_ranges[0].size(), s.pp_ranges[1].size()), 2);

  // one layer, four SGs 1:2:2:4 -> tensor tiling
  auto w2 = make(gt::clique_cluster({4}, {1, 2, 2, 4}, 0.01, 1, 1e10, 1e8), w.model);
  auto s2 = choose_intra_split(0, {0, 1}, w2.ctx());
  EXPECT_EQ(s2.kind, IntraSplitKind::AsymmetricTPDP);

  // one layer, 1:1:2 cannot tile -> data split
  auto w3 = make(gt::clique_cluster({3}, {1, 1, 2}), w.model);
  ASSERT_EQ(w3.h.second_level[0].size(), 2u);  // {1,1} and {2}
  auto s3 = choose_intra_split(0, {0, 1}, w3.ctx());
  EXPECT_EQ(s3.kind, IntraSplitKind::AsymmetricDP);
  EXPECT_EQ(s3.fractions, (std::vector<double>{0.5, 0.5}));
  auto w4 = make(gt::clique_cluster({3}, {1, 4, 16}), w.model);
  auto s4 = choose_intra_split(0, {0, 1}, w4.ctx());
  EXPECT_EQ(s4.kind, IntraSplitKind::AsymmetricDP);
  EXPECT_NEAR(s4.fractions[0] + s4.fractions[1] + s4.fractions[2], 1.0, 1e-12);
}

TEST(SearchPlan, TrivialSingleStage) {
  ModelSpec m;
  m.layers = {{1, 1, 1, 1, 1}};
  m.batch_candidates = {4};
  m.microbatch_candidates = {1};
  auto w = make(gt::clique_cluster({1}, {2}), m);
  auto r = search_plan(w.ctx(), {});
  EXPECT_DOUBLE_EQ(r.cost.plan_cost, plan_cost(r.plan, w.ctx()).plan_cost);
  EXPECT_DOUBLE_EQ(r.cost.plan_cost, 4 * 3 / 2.0);
}

TEST(SearchPlan, WithinFivePercentOfOracle) {
  gt::Rng g(17);
  for (int trial = 0; trial < 12; ++trial) {
    auto w = make(gt::random_cluster(g, gt::uniform_int(g, 2, 4)),
                  gt::random_model(g, gt::uniform_int(g, 4, 8), {32, 64}, {4, 8}));
    SearchConfig cfg;
    cfg.seed = trial;
    const auto r = search_plan(w.ctx(), cfg);
    const double best = oracle(w);
    EXPECT_LE(r.cost_per_sample, 1.05 * best) << "trial " << trial;
    EXPECT_NEAR(exhaustive_plan(w.ctx()).cost_per_sample, best, 1e-12 * best);
    for (const auto& t : r.traces) {
      for (std::size_t i = 1; i < t.best.size(); ++i) EXPECT_LE(t.best[i], t.best[i - 1]);
    }
  }
}

TEST(SearchPlan, Deterministic) {
  gt::Rng g(23);
  auto w = make(gt::random_cluster(g, 4), gt::random_model(g, 8));
  SearchConfig cfg;
  cfg.seed = 99;
  const auto a = search_plan(w.ctx(), cfg);
  const auto b = search_plan(w.ctx(), cfg);
  EXPECT_EQ(io::to_json(a.plan, w.h), io::to_json(b.plan, w.h));
  EXPECT_EQ(a.evaluations, b.evaluations);
}

TEST(SearchPlan, EmittedPlansAreValid) {
  gt::Rng g(29);
  for (int trial = 0; trial < 20; ++trial) {
    auto w = make(gt::random_cluster(g, gt::uniform_int(g, 1, 5)), gt::random_model(g, 10));
    SearchConfig cfg;
    cfg.seed = trial;
    cfg.max_iter = 5;
    const auto r = search_plan(w.ctx(), cfg);
    EXPECT_NO_THROW(validate_plan(r.plan, w.model.layers.size(), w.h.first_level.size()));
    EXPECT_EQ(r.plan.stages.size(), w.h.first_level.size());
    for (const auto& t : r.traces) {
      for (std::size_t i = 1; i < t.best.size(); ++i) EXPECT_LE(t.best[i], t.best[i - 1]);
    }
  }
}

TEST(SearchPlan, AllInfeasible) {
  auto f = gt::clique_cluster({1, 1}, {1, 1});
  for (auto& d : f.devices) d.memory_bytes = 1;
  gt::Rng g(1);
  auto w = make(f, gt::random_model(g, 4));
  try {
    search_plan(w.ctx(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoFeasiblePlan);
  }
}
