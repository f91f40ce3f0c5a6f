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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geopipe/agglomerate.hpp"
#include "geopipe/error.hpp"
#include "geopipe/profiling.hpp"

namespace geopipe {

inline constexpr double kDefaultGroupingThreshold = 0.3;

struct FirstLevelGroup {
  std::string id;
  std::vector<std::size_t> members;  // topology indices, ascending
  std::vector<DeviceId> member_ids;
  std::optional<double> intra_metric;  // mean pairwise p_t, none for singletons
  double aggregate_capacity = 0.0;
  std::optional<double> min_intra_bandwidth;
};

struct SecondLevelGroup {
  std::string id;
  std::string parent_fg_id;
  std::vector<std::size_t> members;
  std::vector<DeviceId> member_ids;
  double aggregate_capacity = 0.0;
};

/// One evaluated merge; `values` are the quantities the predicate compared.
struct MergeRecord {
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  std::vector<double> values;
  double spread = 0.0;
  bool accepted = false;
};

using MergeAudit = std::vector<MergeRecord>;

/// |max - min| / max over a set of positive values.
inline double relative_spread(const std::vector<double>& values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi <= 0.0) return 0.0;
  return (*hi - *lo) / *hi;
}

/// Mean p_t over all cross pairs of two disjoint device sets.
inline double group_pair_metric(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                                const ClusterTopology& topo) {
  if (a.empty() || b.empty()) throw Error(Errc::InvalidPair, "groups must be non-empty");
  double sum = 0.0;
  for (std::size_t u : a) {
    for (std::size_t v : b) {
      if (u == v) throw Error(Errc::InvalidPair, "groups overlap on device " + topo.device(u).spec.id);
      sum += topo.p_t(u, v);
    }
  }
  return sum / static_cast<double>(a.size() * b.size());
}

inline std::optional<double> intra_group_metric(const std::vector<std::size_t>& g, const ClusterTopology& topo) {
  if (g.size() < 2) return std::nullopt;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      sum += topo.p_t(g[i], g[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

inline std::optional<double> min_intra_bandwidth(const std::vector<std::size_t>& g, const ClusterTopology& topo) {
  if (g.size() < 2) return std::nullopt;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) lo = std::min(lo, topo.link(g[i], g[j]).bandwidth_Bps);
  }
  return lo;
}

inline double aggregate_capacity(const std::vector<std::size_t>& g, const ClusterTopology& topo) {
  double sum = 0.0;
  for (std::size_t i : g) sum += topo.p_c(i);
  return sum;
}

namespace detail {

inline void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(Errc::InvalidThreshold, "grouping threshold must lie in (0, 1)");
  }
}

inline std::vector<DeviceId> ids_of(const std::vector<std::size_t>& g, const ClusterTopology& topo) {
  std::vector<DeviceId> ids;
  ids.reserve(g.size());
  for (std::size_t i : g) ids.push_back(topo.device(i).spec.id);
  return ids;
}

}  // namespace detail

/// Network-homogeneous clustering of the whole cluster.
///
/// The heap pops the pair with the best capability (1 / mean cross p_t).
/// A merge is accepted iff the relative spread of {value(A), value(B),
/// cross p_t} stays below `threshold`, where a group's value is its mean
/// intra p_t and a singleton's value is the cross p_t of the candidate pair.
inline std::vector<FirstLevelGroup> group_first_level(const ClusterTopology& topo,
                                                      double threshold = kDefaultGroupingThreshold,
                                                      MergeAudit* audit = nullptr) {
  if (topo.empty()) throw Error(Errc::EmptyCluster, "cluster has no devices");
  detail::check_threshold(threshold);

  auto score = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return 1.0 / group_pair_metric(a, b, topo);
  };
  auto accept = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    const double cross = group_pair_metric(a, b, topo);
    const double va = intra_group_metric(a, topo).value_or(cross);
    const double vb = intra_group_metric(b, topo).value_or(cross);
    std::vector<double> values{va, vb, cross};
    const double spread = relative_spread(values);
    const bool ok = spread < threshold;
    if (audit) audit->push_back({a, b, std::move(values), spread, ok});
    return ok;
  };

  const auto clusters = agglomerate(topo.size(), score, accept);

  std::vector<FirstLevelGroup> groups;
  groups.reserve(clusters.size());
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto& c = clusters[k];
    groups.push_back({"FG" + std::to_string(k + 1), c, detail::ids_of(c, topo), intra_group_metric(c, topo),
                      aggregate_capacity(c, topo), min_intra_bandwidth(c, topo)});
  }
  return groups;
}

/// Compute-homogeneous clustering inside one first-level group. Pairs with
/// the smallest relative gap of mean member p_c pop first; a merge needs that
/// gap below `threshold`.
inline std::vector<SecondLevelGroup> group_second_level(const FirstLevelGroup& fg, const ClusterTopology& topo,
                                                        double threshold = kDefaultGroupingThreshold,
                                                        MergeAudit* audit = nullptr) {
  if (fg.members.empty()) throw Error(Errc::EmptyCluster, "first-level group " + fg.id + " is empty");
  detail::check_threshold(threshold);

  auto mean_pc = [&](const std::vector<std::size_t>& local) {
    double s = 0.0;
    for (std::size_t i : local) s += topo.p_c(fg.members[i]);
    return s / static_cast<double>(local.size());
  };
  auto gap = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return relative_spread({mean_pc(a), mean_pc(b)});
  };
  auto score = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) { return -gap(a, b); };
  auto accept = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<double> values{mean_pc(a), mean_pc(b)};
    const double spread = relative_spread(values);
    const bool ok = spread < threshold;
    if (audit) {
      auto global = [&](const std::vector<std::size_t>& local) {
        std::vector<std::size_t> g;
        for (std::size_t i : local) g.push_back(fg.members[i]);
        return g;
      };
      audit->push_back({global(a), global(b), std::move(values), spread, ok});
    }
    return ok;
  };

  // fg.members is ascending, so local index order matches device id order.
  const auto clusters = agglomerate(fg.members.size(), score, accept);

  std::vector<SecondLevelGroup> groups;
  groups.reserve(clusters.size());
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i : clusters[k]) members.push_back(fg.members[i]);
    groups.push_back({fg.id + "/SG" + std::to_string(k + 1), fg.id, members, detail::ids_of(members, topo),
                      aggregate_capacity(members, topo)});
  }
  return groups;
}

/// Both levels in one pass.
struct DeviceHierarchy {
  std::vector<FirstLevelGroup> first_level;
  std::vector<std::vector<SecondLevelGroup>> second_level;  // parallel to first_level
};

inline DeviceHierarchy build_hierarchy(const ClusterTopology& topo, double threshold_net = kDefaultGroupingThreshold,
                                       double threshold_compute = kDefaultGroupingThreshold) {
  DeviceHierarchy h;
  h.first_level = group_first_level(topo, threshold_net);
  for (const auto& fg : h.first_level) h.second_level.push_back(group_second_level(fg, topo, threshold_compute));
  return h;
}

}  // namespace geopipe
