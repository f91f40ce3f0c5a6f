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
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geopipe/engine.hpp"
#include "geopipe/timing.hpp"

namespace geopipe {

enum class Signal { Stable, Degraded, Recovered };
enum class Phase { Fill, Run, Drain };

constexpr std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::Stable: return "stable";
    case Signal::Degraded: return "degraded";
    case Signal::Recovered: return "recovered";
  }
  return "?";
}

struct AdapterConfig {
  std::size_t window = 20;
  double ema_alpha = 0.05;
  double degrade_factor = 1.2;
  double recover_factor = 1.05;
  bool fill_rule = true;
  bool drain_rule = true;
  // A link is "poor" at fill time when a base micro-batch transfer is
  // expected to take longer than this. Unset: the successor's forward time.
  std::optional<double> fill_poor_transfer_s;
};

/// Ring of the most recent per-sample transfer latencies plus a long-run
/// EMA baseline. The baseline is frozen while the sending stage runs with a
/// reduced micro-batch so it keeps describing the healthy link.
class MonitorWindow {
 public:
  explicit MonitorWindow(std::size_t capacity = 20, double alpha = 0.05) : capacity_(capacity), alpha_(alpha) {}

  void record(double normalized_latency, bool freeze_baseline = false) {
    samples_.push_back(normalized_latency);
    if (samples_.size() > capacity_) samples_.pop_front();
    ++observed_;
    if (freeze_baseline && baseline_) return;
    baseline_ = baseline_ ? (1.0 - alpha_) * *baseline_ + alpha_ * normalized_latency : normalized_latency;
  }

  bool full() const noexcept { return samples_.size() >= capacity_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t observed() const noexcept { return observed_; }

  double mean() const {
    if (samples_.empty()) return 0.0;
    return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
  }

  double baseline() const noexcept { return baseline_.value_or(0.0); }
  void set_baseline(double b) { baseline_ = b; }

  /// Level that a further degradation is measured against while reduced.
  std::optional<double> degrade_reference;

  /// Starts a fresh observation window after an adjustment; the baseline stays.
  void clear() { samples_.clear(); }

 private:
  std::size_t capacity_;
  double alpha_;
  std::deque<double> samples_;
  std::optional<double> baseline_;
  std::size_t observed_ = 0;
};

/// Latency is normalized per sample so resizing alone never looks like a
/// bandwidth change.
inline void record_transfer(MonitorWindow& w, double latency_s, int samples, bool freeze_baseline = false) {
  w.record(latency_s / static_cast<double>(std::max(1, samples)), freeze_baseline);
}

inline Signal detect_fluctuation(const MonitorWindow& w, bool reduced, const AdapterConfig& cfg = {}) {
  if (!w.full()) return Signal::Stable;
  const double mean = w.mean();
  const double ref = reduced && w.degrade_reference ? *w.degrade_reference : w.baseline();
  if (mean > cfg.degrade_factor * ref) return Signal::Degraded;
  if (reduced && mean < cfg.recover_factor * w.baseline()) return Signal::Recovered;
  return Signal::Stable;
}

struct StageBatchState {
  int stage = 0;
  int current = 0;
  int configured = 0;
  Phase phase = Phase::Run;

  bool reduced() const noexcept { return current < configured; }
};

/// Size after a monitor signal. Sizes stay on the m / 2^k lattice.
inline int adjust(const StageBatchState& st, Signal signal) {
  switch (signal) {
    case Signal::Degraded: return std::max(1, st.current / 2);
    case Signal::Recovered: return std::min(st.configured, st.current * 2);
    case Signal::Stable: return st.current;
  }
  return st.current;
}

/// Phase presets applied on top of the monitor-driven size.
inline int fill_size(const StageBatchState& st) { return std::max(1, std::min(st.current, st.configured / 2)); }
inline int drain_size(const StageBatchState& st) { return std::max(1, st.current / 2); }

struct AdapterAction {
  double t = 0.0;
  int stage = 0;
  Direction dir = Direction::Forward;
  int old_size = 0;
  int new_size = 0;
  std::string signal;
  friend bool operator==(const AdapterAction&, const AdapterAction&) = default;
};

/// Per-stage dynamic micro-batch sizing driven by transfer monitors.
class Adapter : public ChunkController {
 public:
  Adapter(const PipelineTiming& timing, AdapterConfig cfg, int iterations = 1)
      : timing_(timing), cfg_(cfg), m_(timing.microbatch) {
    const int S = static_cast<int>(timing.stage_count());
    for (int s = 0; s < S; ++s) {
      fwd_.push_back({s, m_, m_, Phase::Fill});
      bwd_.push_back({s, m_, m_, Phase::Fill});
    }
    monitors_.assign(2 * std::max(0, S - 1), MonitorWindow(cfg.window, cfg.ema_alpha));
    fill_active_.assign(S, false);
    drain_active_.assign(iterations, false);
  }

  int forward_chunk(int stage, int /*iteration*/) const override {
    return fill_active_[stage] ? fill_size(fwd_[stage]) : fwd_[stage].current;
  }

  int backward_chunk(int stage, int iteration) const override {
    const bool drain = iteration < static_cast<int>(drain_active_.size()) && drain_active_[iteration];
    return drain ? drain_size(bwd_[stage]) : bwd_[stage].current;
  }

  void on_iteration_start(int stage, int /*iteration*/, double now) override {
    fwd_[stage].phase = Phase::Fill;
    bwd_[stage].phase = Phase::Fill;
    fill_active_[stage] = cfg_.fill_rule && poor_link(stage);
    if (fill_active_[stage] && fill_size(fwd_[stage]) != fwd_[stage].current) {
      log_.push_back({now, stage, Direction::Forward, fwd_[stage].current, fill_size(fwd_[stage]), "fill"});
    }
  }

  void on_first_backward(int stage, int /*iteration*/, double now) override {
    fwd_[stage].phase = Phase::Run;
    bwd_[stage].phase = Phase::Run;
    if (fill_active_[stage] && fill_size(fwd_[stage]) != fwd_[stage].current) {
      log_.push_back({now, stage, Direction::Forward, fill_size(fwd_[stage]), fwd_[stage].current, "run"});
    }
    fill_active_[stage] = false;
  }

  void on_forwards_complete(int iteration, double now) override {
    for (auto& st : fwd_) st.phase = Phase::Drain;
    for (auto& st : bwd_) st.phase = Phase::Drain;
    if (!cfg_.drain_rule || iteration >= static_cast<int>(drain_active_.size())) return;
    drain_active_[iteration] = true;
    for (const auto& st : bwd_) {
      if (drain_size(st) != st.current) {
        log_.push_back({now, st.stage, Direction::Backward, st.current, drain_size(st), "drain"});
      }
    }
  }

  void on_transfer(const TransferRecord& rec) override {
    MonitorWindow& w = monitors_[2 * rec.boundary + (rec.dir == Direction::Forward ? 0 : 1)];
    StageBatchState& st = rec.dir == Direction::Forward ? fwd_[rec.sender()] : bwd_[rec.sender()];
    record_transfer(w, rec.duration(), rec.size(), st.reduced());
    const Signal sig = detect_fluctuation(w, st.reduced(), cfg_);
    if (sig == Signal::Stable) return;
    const int next = adjust(st, sig);
    if (sig == Signal::Degraded) w.degrade_reference = w.mean();
    if (next == m_) w.degrade_reference.reset();
    w.clear();
    if (next == st.current) return;
    log_.push_back({rec.end, st.stage, rec.dir, st.current, next, std::string(to_string(sig))});
    st.current = next;
  }

  const std::vector<AdapterAction>& actions() const noexcept { return log_; }
  const StageBatchState& forward_state(int stage) const { return fwd_.at(stage); }
  const StageBatchState& backward_state(int stage) const { return bwd_.at(stage); }
  const MonitorWindow& monitor(int boundary, Direction d) const {
    return monitors_.at(2 * boundary + (d == Direction::Forward ? 0 : 1));
  }

 private:
  bool poor_link(int stage) const {
    if (stage + 1 >= static_cast<int>(timing_.stage_count())) return false;
    const MonitorWindow& w = monitors_[2 * stage];
    const double expected = w.size() > 0 ? w.mean() * m_ : timing_.transfer_time(stage, m_);
    const double bound = cfg_.fill_poor_transfer_s.value_or(timing_.stages[stage + 1].fwd_s);
    return expected > bound;
  }

  const PipelineTiming& timing_;
  AdapterConfig cfg_;
  int m_;
  std::vector<StageBatchState> fwd_;
  std::vector<StageBatchState> bwd_;
  std::vector<MonitorWindow> monitors_;  // [2 * boundary + direction]
  std::vector<bool> fill_active_;
  std::vector<bool> drain_active_;
  std::vector<AdapterAction> log_;
};

inline bool is_monitor_action(const AdapterAction& a) { return a.signal == "degraded" || a.signal == "recovered"; }

/// Feeds a logged transfer sequence through a fresh adapter and returns the
/// monitor-driven actions it takes.
inline std::vector<AdapterAction> replay_monitor_actions(const std::vector<TransferRecord>& transfers,
                                                         const PipelineTiming& timing, const AdapterConfig& cfg) {
  Adapter a(timing, cfg);
  for (const auto& rec : transfers) a.on_transfer(rec);
  std::vector<AdapterAction> out;
  for (const auto& act : a.actions()) {
    if (is_monitor_action(act)) out.push_back(act);
  }
  return out;
}

}  // namespace geopipe
