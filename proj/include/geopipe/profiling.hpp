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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geopipe/error.hpp"

namespace geopipe {

using DeviceId = std::string;

struct BenchmarkSample {
  std::string task;
  double seconds = 0.0;
  std::optional<double> weight;  // uniform 1/n when absent
};

struct DeviceSpec {
  DeviceId id;
  std::uint64_t memory_bytes = 0;
  std::vector<BenchmarkSample> benchmarks;
  std::string region;  // informational only
};

/// Averaged transfer times for one unordered device pair. alpha is the large
/// payload time, beta the small (latency probe) payload time.
struct LinkMeasurement {
  DeviceId a;
  DeviceId b;
  double alpha_s = 0.0;
  double beta_s = 0.0;
  double payload_bytes = 0.0;
  // Raw link parameters kept for the cost model and the simulator.
  double latency_s = 0.0;
  double bandwidth_Bps = 0.0;
};

struct CommMetric {
  double p_t = 0.0;  // lower is better
};

struct ComputeMetric {
  double p_c = 0.0;  // higher is better
};

struct WeightedTask {
  double weight = 0.0;
  double seconds = 0.0;
};

inline CommMetric comm_capability(const LinkMeasurement& m) {
  if (!(m.alpha_s > 0.0) || !(m.beta_s > 0.0) || !(m.payload_bytes > 0.0)) {
    throw Error(Errc::InvalidMeasurement,
                "link " + m.a + "-" + m.b + " needs positive alpha, beta and payload size");
  }
  return CommMetric{m.alpha_s + m.beta_s / m.payload_bytes};
}

inline ComputeMetric compute_capacity(std::span<const WeightedTask> tasks) {
  if (tasks.empty()) throw Error(Errc::InvalidBenchmark, "empty benchmark list");
  double total = 0.0;
  bool any_positive = false;
  for (const auto& t : tasks) {
    if (!(t.seconds > 0.0)) throw Error(Errc::InvalidBenchmark, "benchmark time must be positive");
    if (t.weight < 0.0) throw Error(Errc::InvalidBenchmark, "benchmark weight must be non-negative");
    any_positive = any_positive || t.weight > 0.0;
    total += t.weight / t.seconds;
  }
  if (!any_positive) throw Error(Errc::InvalidBenchmark, "at least one benchmark weight must be positive");
  return ComputeMetric{total};
}

/// Resolves missing weights to 1/n and evaluates compute_capacity.
inline ComputeMetric device_capacity(const DeviceSpec& d) {
  if (d.benchmarks.empty()) throw Error(Errc::InvalidBenchmark, "device " + d.id + " has no benchmarks");
  std::vector<WeightedTask> tasks;
  tasks.reserve(d.benchmarks.size());
  const double uniform = 1.0 / static_cast<double>(d.benchmarks.size());
  for (const auto& b : d.benchmarks) tasks.push_back({b.weight.value_or(uniform), b.seconds});
  return compute_capacity(tasks);
}

struct LinkInfo {
  CommMetric metric;
  double latency_s = 0.0;
  double bandwidth_Bps = 0.0;
};

struct TopologyDevice {
  DeviceSpec spec;
  ComputeMetric capacity;
};

/// Devices sorted by id with a dense symmetric link matrix.
class ClusterTopology {
 public:
  ClusterTopology() = default;
  ClusterTopology(std::vector<TopologyDevice> devices, std::vector<LinkInfo> matrix)
      : devices_(std::move(devices)), matrix_(std::move(matrix)) {}

  std::size_t size() const noexcept { return devices_.size(); }
  bool empty() const noexcept { return devices_.empty(); }
  const std::vector<TopologyDevice>& devices() const noexcept { return devices_; }
  const TopologyDevice& device(std::size_t i) const { return devices_.at(i); }

  std::optional<std::size_t> index_of(const DeviceId& id) const {
    auto it = std::lower_bound(devices_.begin(), devices_.end(), id,
                               [](const TopologyDevice& d, const DeviceId& v) { return d.spec.id < v; });
    if (it == devices_.end() || it->spec.id != id) return std::nullopt;
    return static_cast<std::size_t>(it - devices_.begin());
  }

  const LinkInfo& link(std::size_t i, std::size_t j) const {
    if (i == j || i >= size() || j >= size()) throw Error(Errc::InvalidPair, "no link for this device pair");
    return matrix_[i * size() + j];
  }

  double p_t(std::size_t i, std::size_t j) const { return link(i, j).metric.p_t; }
  double p_c(std::size_t i) const { return devices_.at(i).capacity.p_c; }

  std::size_t link_count() const noexcept { return size() < 2 ? 0 : size() * (size() - 1) / 2; }

  friend bool operator==(const ClusterTopology& a, const ClusterTopology& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.devices_[i].spec.id != b.devices_[i].spec.id ||
          a.devices_[i].capacity.p_c != b.devices_[i].capacity.p_c ||
          a.devices_[i].spec.memory_bytes != b.devices_[i].spec.memory_bytes) {
        return false;
      }
    }
    for (std::size_t k = 0; k < a.matrix_.size(); ++k) {
      const auto& x = a.matrix_[k];
      const auto& y = b.matrix_[k];
      if (x.metric.p_t != y.metric.p_t || x.latency_s != y.latency_s || x.bandwidth_Bps != y.bandwidth_Bps) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<TopologyDevice> devices_;
  std::vector<LinkInfo> matrix_;  // row-major, diagonal unused
};

/// Assembles a topology. Output is independent of input ordering.
inline ClusterTopology build_topology(std::vector<DeviceSpec> devices,
                                      const std::vector<LinkMeasurement>& measurements) {
  std::sort(devices.begin(), devices.end(), [](const DeviceSpec& a, const DeviceSpec& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < devices.size(); ++i) {
    if (devices[i].id == devices[i - 1].id) {
      throw Error(Errc::IncompleteTopology, "duplicate device id " + devices[i].id);
    }
  }

  std::vector<TopologyDevice> out;
  out.reserve(devices.size());
  for (auto& d : devices) {
    if (d.memory_bytes == 0) throw Error(Errc::InvalidBenchmark, "device " + d.id + " has zero memory");
    const ComputeMetric cap = device_capacity(d);
    out.push_back({std::move(d), cap});
  }

  const std::size_t n = out.size();
  auto index = [&](const DeviceId& id) -> std::size_t {
    auto it = std::lower_bound(out.begin(), out.end(), id,
                               [](const TopologyDevice& d, const DeviceId& v) { return d.spec.id < v; });
    if (it == out.end() || it->spec.id != id) {
      throw Error(Errc::IncompleteTopology, "link references unknown device " + id);
    }
    return static_cast<std::size_t>(it - out.begin());
  };

  std::vector<LinkInfo> matrix(n * n);
  std::vector<bool> seen(n * n, false);
  for (const auto& m : measurements) {
    if (m.a == m.b) throw Error(Errc::InvalidMeasurement, "self link on " + m.a);
    const std::size_t i = index(m.a);
    const std::size_t j = index(m.b);
    if (seen[i * n + j]) throw Error(Errc::IncompleteTopology, "duplicate link " + m.a + "-" + m.b);
    if (!(m.bandwidth_Bps > 0.0) || m.latency_s < 0.0) {
      throw Error(Errc::InvalidMeasurement, "link " + m.a + "-" + m.b + " needs positive bandwidth");
    }
    const LinkInfo info{comm_capability(m), m.latency_s, m.bandwidth_Bps};
    matrix[i * n + j] = info;
    matrix[j * n + i] = info;
    seen[i * n + j] = seen[j * n + i] = true;
  }

  std::string missing;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!seen[i * n + j]) missing += (missing.empty() ? "" : ", ") + out[i].spec.id + "-" + out[j].spec.id;
    }
  }
  if (!missing.empty()) throw Error(Errc::IncompleteTopology, "missing links: " + missing);

  return ClusterTopology(std::move(out), std::move(matrix));
}

}  // namespace geopipe
