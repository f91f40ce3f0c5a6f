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

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "geopipe/grouping.hpp"

using namespace geopipe;
namespace gt = geopipe::testing;

namespace {

// Components of the graph whose edges are within (1 + thr) of the fastest pair.
std::vector<std::vector<std::size_t>> fast_components(const ClusterTopology& t, double thr) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) lo = std::min(lo, t.p_t(i, j));
  std::vector<std::size_t> parent(t.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j)
      if (t.p_t(i, j) <= lo * (1 + thr)) parent[find(i)] = find(j);
  std::map<std::size_t, std::vector<std::size_t>> comps;
  for (std::size_t i = 0; i < t.size(); ++i) comps[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [_, c] : comps) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> members(const std::vector<FirstLevelGroup>& g) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& x : g) out.push_back(x.members);
  return out;
}

void expect_partition(const std::vector<std::vector<std::size_t>>& groups, std::vector<std::size_t> universe) {
  std::vector<std::size_t> all;
  for (const auto& g : groups) {
    EXPECT_FALSE(g.empty());
    all.insert(all.end(), g.begin(), g.end());
  }
  std::sort(all.begin(), all.end());
  std::sort(universe.begin(), universe.end());
  EXPECT_EQ(all, universe);
}

FirstLevelGroup whole(const ClusterTopology& t) {
  std::vector<std::size_t> all(t.size());
  std::iota(all.begin(), all.end(), 0);
  return {"FG1", all, {}, std::nullopt, aggregate_capacity(all, t), std::nullopt};
}

}  // namespace

TEST(GroupPairMetric, Means) {
  auto t = gt::topology_of(gt::clique_cluster({4}, {1, 1, 1, 1}));
  // rebuild with explicit p_t values
  io::ClusterFile f;
  for (int i = 0; i < 4; ++i) f.devices.push_back(gt::device(gt::dev_id(i), 1));
  const double pt[4][4] = {{0, 1, 3, 1}, {1, 0, 2, 4}, {3, 2, 0, 1}, {1, 4, 1, 0}};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) f.links.push_back(gt::link(gt::dev_id(i), gt::dev_id(j), pt[i][j], 1e9));
  t = gt::topology_of(f);
  EXPECT_NEAR(group_pair_metric({0}, {1}, t), 1.0, 1e-12);
  EXPECT_NEAR(group_pair_metric({0}, {1, 2}, t), 2.0, 1e-12);
  // cross pairs (0,2)=3 (0,3)=1 (1,2)=2 (1,3)=4
  EXPECT_NEAR(group_pair_metric({0, 1}, {2, 3}, t), 2.5, 1e-12);
  EXPECT_THROW(group_pair_metric({0, 1}, {1, 2}, t), Error);
}

TEST(GroupFirstLevel, SingleDevice) {
  auto t = gt::topology_of(gt::clique_cluster({1}, {1}));
  auto g = group_first_level(t);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_FALSE(g[0].intra_metric.has_value());
  EXPECT_FALSE(g[0].min_intra_bandwidth.has_value());
}

TEST(GroupFirstLevel, ThreeCliquesOfFour) {
  auto t = gt::topology_of(gt::clique_cluster({4, 4, 4}, std::vector<double>(12, 1.0)));
  auto g = group_first_level(t, 0.3);
  ASSERT_EQ(g.size(), 3u);
  for (const auto& x : g) EXPECT_EQ(x.members.size(), 4u);
  EXPECT_EQ(members(g), fast_components(t, 0.3));
  EXPECT_NEAR(*g[0].intra_metric, 0.01, 1e-12);
  EXPECT_DOUBLE_EQ(*g[0].min_intra_bandwidth, 1e10);
}

TEST(GroupFirstLevel, UniformMetricMergesEverything) {
  auto t = gt::topology_of(gt::clique_cluster({7}, std::vector<double>(7, 1.0), 0.5));
  auto g = group_first_level(t, 0.3);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].members.size(), 7u);
}

TEST(GroupFirstLevel, Errors) {
  ClusterTopology empty = build_topology({}, {});
  try {
    group_first_level(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyCluster);
  }
  auto t = gt::topology_of(gt::clique_cluster({2}, {1, 1}));
  for (double bad : {0.0, 1.0, -0.1, 1.5}) EXPECT_THROW(group_first_level(t, bad), Error);
}

TEST(GroupSecondLevel, EqualCapacities) {
  auto t = gt::topology_of(gt::clique_cluster({3}, {10, 10, 10}));
  auto sg = group_second_level(whole(t), t);
  ASSERT_EQ(sg.size(), 1u);
  EXPECT_EQ(sg[0].members.size(), 3u);
  EXPECT_EQ(sg[0].parent_fg_id, "FG1");
}

TEST(GroupSecondLevel, ThreeTiers) {
  auto t = gt::topology_of(gt::clique_cluster({5}, {10, 10, 5, 5, 1}));
  auto sg = group_second_level(whole(t), t, 0.2);
  ASSERT_EQ(sg.size(), 3u);
  std::set<std::vector<std::size_t>> got;
  for (const auto& s : sg) got.insert(s.members);
  EXPECT_EQ(got, (std::set<std::vector<std::size_t>>{{0, 1}, {2, 3}, {4}}));
}

TEST(GroupSecondLevel, AllStandalone) {
  auto t = gt::topology_of(gt::clique_cluster({4}, {1, 3, 9, 27}));
  EXPECT_EQ(group_second_level(whole(t), t, 0.3).size(), 4u);
}

TEST(GroupSecondLevel, RegionsPattern) {
  auto t = gt::topology_of(gt::regions_cluster());
  auto h = build_hierarchy(t);
  ASSERT_EQ(h.first_level.size(), 3u);
  auto multi = [](const std::vector<SecondLevelGroup>& v) {
    return std::count_if(v.begin(), v.end(), [](const auto& s) { return s.members.size() > 1; });
  };
  EXPECT_EQ(multi(h.second_level[0]), 3);
  EXPECT_EQ(h.second_level[0].size(), 3u);
  EXPECT_EQ(multi(h.second_level[1]), 0);
  EXPECT_EQ(h.second_level[1].size(), 2u);
  EXPECT_EQ(multi(h.second_level[2]), 1);
  EXPECT_EQ(h.second_level[2].size(), 3u);
}

TEST(Grouping, PartitionLawsAndAudit) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    auto f = gt::random_cluster(rng, gt::uniform_int(rng, 1, 5), 4);
    // perturb p_t so groups are not perfect cliques
    for (auto& l : f.links) {
      l.alpha_s *= gt::uniform(rng, 0.7, 1.3);
    }
    const auto t = gt::topology_of(f);
    const double thr = gt::uniform(rng, 0.05, 0.9);
    MergeAudit audit;
    const auto fgs = group_first_level(t, thr, &audit);
    std::vector<std::size_t> all(t.size());
    std::iota(all.begin(), all.end(), 0);
    expect_partition(members(fgs), all);
    for (const auto& r : audit) {
      if (r.accepted) EXPECT_LT(r.spread, thr);
      else EXPECT_GE(r.spread, thr);
    }
    for (const auto& fg : fgs) {
      MergeAudit sa;
      const auto sgs = group_second_level(fg, t, thr, &sa);
      std::vector<std::vector<std::size_t>> m;
      for (const auto& s : sgs) {
        m.push_back(s.members);
        EXPECT_EQ(s.parent_fg_id, fg.id);
      }
      expect_partition(m, fg.members);
      for (const auto& r : sa) {
        if (r.accepted) { EXPECT_LT(r.spread, thr); }
      }
    }
  }
}

TEST(Grouping, MonotoneInThreshold) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    auto f = gt::random_cluster(rng, gt::uniform_int(rng, 2, 5), 4);
    for (auto& l : f.links) l.alpha_s *= gt::uniform(rng, 0.5, 1.5);
    const auto t = gt::topology_of(f);
    std::size_t prev = t.size() + 1;
    for (double thr = 0.05; thr < 0.96; thr += 0.05) {
      const std::size_t n = group_first_level(t, thr).size();
      EXPECT_LE(n, prev) << "trial " << trial << " threshold " << thr;
      prev = n;
    }
  }
}

TEST(Grouping, DeterministicUnderInputOrder) {
  std::mt19937_64 rng(4);
  auto f = gt::random_cluster(rng, 4, 3);
  const auto ref = build_hierarchy(gt::topology_of(f));
  for (int i = 0; i < 10; ++i) {
    std::shuffle(f.devices.begin(), f.devices.end(), rng);
    std::shuffle(f.links.begin(), f.links.end(), rng);
    const auto h = build_hierarchy(gt::topology_of(f));
    ASSERT_EQ(h.first_level.size(), ref.first_level.size());
    for (std::size_t k = 0; k < h.first_level.size(); ++k) {
      EXPECT_EQ(h.first_level[k].member_ids, ref.first_level[k].member_ids);
      ASSERT_EQ(h.second_level[k].size(), ref.second_level[k].size());
      for (std::size_t j = 0; j < h.second_level[k].size(); ++j)
        EXPECT_EQ(h.second_level[k][j].member_ids, ref.second_level[k][j].member_ids);
    }
  }
}
