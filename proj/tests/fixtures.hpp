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

// Shared fixtures for the unit and acceptance tests.

#include <random>
#include <string>
#include <vector>

#include "geopipe/costmodel.hpp"
#include "geopipe/grouping.hpp"
#include "geopipe/io.hpp"
#include "geopipe/plan.hpp"
#include "geopipe/profiling.hpp"
#include "geopipe/timing.hpp"

namespace geopipe::testing {

inline std::string dev_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "d" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

/// A device whose single benchmark yields capacity `cap`.
inline DeviceSpec device(const std::string& id, double cap, std::uint64_t memory = 1ull << 40,
                         const std::string& region = "") {
  return {id, memory, {{"ref", 1.0 / cap, std::nullopt}}, region};
}

/// A link with metric p_t split evenly between alpha and beta/payload.
inline LinkMeasurement link(const std::string& a, const std::string& b, double pt, double bw, double latency = 0.0) {
  const double payload = 1e6;
  return {a, b, pt / 2, pt / 2 * payload, payload, latency, bw};
}

/// Cliques of the given sizes: intra pairs get (intra_pt, intra_bw), cross
/// pairs (cross_pt, cross_bw). Devices are numbered d00, d01, ... in order.
inline io::ClusterFile clique_cluster(const std::vector<std::size_t>& sizes, const std::vector<double>& caps,
                                      double intra_pt = 0.01, double cross_pt = 1.0, double intra_bw = 1e10,
                                      double cross_bw = 1e8, double latency = 0.0) {
  io::ClusterFile f;
  std::vector<std::size_t> group;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (std::size_t k = 0; k < sizes[g]; ++k) {
      const std::size_t i = group.size();
      f.devices.push_back(device(dev_id(i), caps.at(i), 1ull << 40, "region" + std::to_string(g)));
      group.push_back(g);
    }
  }
  for (std::size_t i = 0; i < group.size(); ++i) {
    for (std::size_t j = i + 1; j < group.size(); ++j) {
      const bool same = group[i] == group[j];
      f.links.push_back(link(dev_id(i), dev_id(j), same ? intra_pt : cross_pt, same ? intra_bw : cross_bw,
                             same ? 0.0 : latency));
    }
  }
  return f;
}

inline ClusterTopology topology_of(const io::ClusterFile& f) { return build_topology(f.devices, f.links); }

/// Twelve devices in three regions (6 / 2 / 4). Capacities are chosen so the
/// compute level gives three pairs, two standalones, and one pair plus two
/// standalones.
inline io::ClusterFile regions_cluster() {
  return clique_cluster({6, 2, 4}, {1.0, 1.05, 2.0, 2.1, 4.0, 4.2, 1.0, 3.0, 1.0, 1.1, 2.5, 6.0});
}

/// Four stages, unit F/B/W, links slower than one micro-batch of compute.
inline PipelineTiming slow_link_timing() {
  PipelineTiming t;
  t.batch = 6;
  t.microbatch = 1;
  for (int s = 0; s < 4; ++s) t.stages.push_back({1.0, 1.0, 1.0, 0.0, 0.0});
  for (int s = 0; s < 3; ++s) t.links.push_back({0.0, 1.5, 1.0});
  return t;
}

/// Four stages whose inter-group links sit just below one forward pass when
/// healthy; used for the bandwidth-drop scenario.
inline PipelineTiming fluctuation_timing() {
  PipelineTiming t;
  t.batch = 128;
  t.microbatch = 32;
  for (int s = 0; s < 4; ++s) t.stages.push_back({1.0, 1.0, 1.0, 0.0, 0.0});
  for (int s = 0; s < 3; ++s) t.links.push_back({0.05, 0.8, 1.0});
  return t;
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Random regional cluster: `groups` cliques of 1..max_size devices.
inline io::ClusterFile random_cluster(Rng& rng, int groups, int max_size = 3) {
  std::vector<std::size_t> sizes;
  std::vector<double> caps;
  for (int g = 0; g < groups; ++g) {
    sizes.push_back(static_cast<std::size_t>(uniform_int(rng, 1, max_size)));
    for (std::size_t k = 0; k < sizes.back(); ++k) caps.push_back(uniform(rng, 1e12, 8e12));
  }
  return clique_cluster(sizes, caps, 0.001, 1.0, uniform(rng, 5e9, 2e10), uniform(rng, 2e8, 1e9),
                        uniform(rng, 0.0, 0.005));
}

/// Random layered model; flops are per sample, in the same units as device capacity.
inline ModelSpec random_model(Rng& rng, int layers, std::vector<int> batches = {64},
                              std::vector<int> micros = {4, 8}) {
  ModelSpec m;
  m.name = "random";
  for (int l = 0; l < layers; ++l) {
    LayerSpec s;
    s.fwd_flops = uniform(rng, 1e10, 4e10);
    s.bwd_input_flops = s.fwd_flops * uniform(rng, 0.8, 1.2);
    s.bwd_weight_flops = s.fwd_flops * uniform(rng, 0.8, 1.2);
    s.activation_out_bytes = uniform(rng, 5e5, 2e6);
    s.param_bytes = uniform(rng, 1e7, 5e7);
    m.layers.push_back(s);
  }
  m.batch_candidates = std::move(batches);
  m.microbatch_candidates = std::move(micros);
  return m;
}

}  // namespace geopipe::testing
