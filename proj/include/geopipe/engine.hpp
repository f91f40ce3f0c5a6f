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
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "geopipe/error.hpp"
#include "geopipe/sample_set.hpp"
#include "geopipe/timing.hpp"
#include "geopipe/trace.hpp"

namespace geopipe {

enum class OpKind { Forward, Backward, WeightUpdate, WeightSync, OptimizerStep };

enum class Policy { GPipe, OneFOneB, ZbOriginal, ZbCompact };

enum class Direction { Forward, Backward };

constexpr std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::Forward: return "F";
    case OpKind::Backward: return "B";
    case OpKind::WeightUpdate: return "W";
    case OpKind::WeightSync: return "Sync";
    case OpKind::OptimizerStep: return "Opt";
  }
  return "?";
}

constexpr std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::GPipe: return "GPIPE";
    case Policy::OneFOneB: return "ONE_F_ONE_B";
    case Policy::ZbOriginal: return "ZB_ORIGINAL";
    case Policy::ZbCompact: return "ZB_COMPACT";
  }
  return "?";
}

constexpr std::string_view to_string(Direction d) { return d == Direction::Forward ? "fwd" : "bwd"; }

inline constexpr Policy kAllPolicies[] = {Policy::GPipe, Policy::OneFOneB, Policy::ZbOriginal, Policy::ZbCompact};

inline Policy policy_from_string(std::string_view s) {
  for (auto p : kAllPolicies) {
    if (to_string(p) == s) return p;
  }
  throw Error(Errc::Parse, "unknown policy '" + std::string(s) + "'");
}

/// B and W run back to back under these policies.
constexpr bool fuses_weight_update(Policy p) { return p == Policy::GPipe || p == Policy::OneFOneB; }

struct PipeOp {
  OpKind kind = OpKind::Forward;
  int stage = 0;
  int iteration = 0;
  int microbatch = -1;  // chunk index within (stage, iteration, kind); -1 for Sync/Opt
  int sample_begin = 0;
  int sample_end = 0;
  double start = 0.0;
  double end = 0.0;

  int size() const noexcept { return sample_end - sample_begin; }
  double duration() const noexcept { return end - start; }
  friend bool operator==(const PipeOp&, const PipeOp&) = default;
};

struct TransferRecord {
  int boundary = 0;  // link between stage boundary and boundary + 1
  Direction dir = Direction::Forward;
  int iteration = 0;
  int sample_begin = 0;
  int sample_end = 0;
  double start = 0.0;
  double end = 0.0;
  double bytes = 0.0;

  int size() const noexcept { return sample_end - sample_begin; }
  double duration() const noexcept { return end - start; }
  int sender() const noexcept { return dir == Direction::Forward ? boundary : boundary + 1; }
  friend bool operator==(const TransferRecord&, const TransferRecord&) = default;
};

struct Schedule {
  Policy policy = Policy::ZbCompact;
  int batch = 0;
  int microbatch = 0;
  int iterations = 1;
  std::vector<std::vector<PipeOp>> stages;  // per stage, in start order
  std::vector<TransferRecord> transfers;    // in completion order
  std::vector<double> iteration_end;        // last OptimizerStep end per iteration
  double makespan = 0.0;

  std::size_t stage_count() const noexcept { return stages.size(); }
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// Decides micro-batch chunk sizes at run time. The engine calls the
/// notification hooks synchronously from its event loop.
class ChunkController {
 public:
  virtual ~ChunkController() = default;
  virtual int forward_chunk(int stage, int iteration) const = 0;
  virtual int backward_chunk(int stage, int iteration) const = 0;
  virtual void on_iteration_start(int /*stage*/, int /*iteration*/, double /*now*/) {}
  virtual void on_first_backward(int /*stage*/, int /*iteration*/, double /*now*/) {}
  virtual void on_forwards_complete(int /*iteration*/, double /*now*/) {}
  virtual void on_transfer(const TransferRecord& /*rec*/) {}
};

struct EngineConfig {
  Policy policy = Policy::ZbCompact;
  int iterations = 1;
  bool async_iterations = false;
};

namespace detail {

class PipelineEngine {
 public:
  PipelineEngine(const PipelineTiming& timing, EngineConfig cfg, const NetworkTrace* trace,
                 ChunkController* controller)
      : timing_(timing), cfg_(cfg), trace_(trace ? trace : &constant_), ctl_(controller) {
    validate_timing(timing_);
    if (cfg_.iterations < 1) throw Error(Errc::InvalidTiming, "iterations must be >= 1");
    S_ = static_cast<int>(timing_.stage_count());
    batch_ = timing_.batch;
    state_.assign(cfg_.iterations, std::vector<StageIter>(S_));
    stages_.assign(S_, StageRun{});
    links_.assign(2 * (S_ - 1), LinkRun{});
    out_.policy = cfg_.policy;
    out_.batch = batch_;
    out_.microbatch = timing_.microbatch;
    out_.iterations = cfg_.iterations;
    out_.stages.assign(S_, {});
    out_.iteration_end.assign(cfg_.iterations, 0.0);
  }

  Schedule run() {
    state_[0][0].input.add(0, batch_);
    for (int s = 0; s < S_; ++s) {
      if (ctl_) ctl_->on_iteration_start(s, 0, 0.0);
    }
    dispatch(0.0);
    while (!events_.empty()) {
      const double t = events_.top().t;
      while (!events_.empty() && events_.top().t == t) {
        const Event e = events_.top();
        events_.pop();
        handle(e);
      }
      dispatch(t);
    }
    for (int s = 0; s < S_; ++s) {
      if (stages_[s].iteration < cfg_.iterations) {
        throw Error(Errc::SchedulingBug, "no runnable work but iterations remain\n" + dump());
      }
    }
    for (const auto& ops : out_.stages) {
      for (const auto& op : ops) out_.makespan = std::max(out_.makespan, op.end);
    }
    return std::move(out_);
  }

 private:
  struct StageIter {
    SampleSet input;     // activations arrived, not yet forwarded
    SampleSet fwd_done;  // forwards completed
    SampleSet grad;      // gradients arrived from the next stage
    SampleSet bwd_taken;
    std::deque<std::pair<int, int>> w_pending;
    int f_started = 0, b_started = 0, w_started = 0, w_done = 0;
    int f_chunks = 0, b_chunks = 0, w_chunks = 0;
    bool first_bwd = false, sync_started = false, sync_done = false, opt_started = false, opt_done = false;
  };

  struct StageRun {
    int iteration = 0;  // oldest iteration whose optimizer step has not finished
    bool busy = false;
    PipeOp op;
  };

  struct Pending {
    int iteration;
    int lo, hi;
  };

  struct LinkRun {
    bool busy = false;
    std::deque<Pending> queue;
    TransferRecord current;
  };

  enum class EventType { OpDone, TransferDone };

  struct Event {
    double t;
    std::uint64_t seq;
    EventType type;
    int index;  // stage, or link slot
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.t != b.t) return a.t > b.t;
      return a.seq > b.seq;
    }
  };

  int link_slot(int boundary, Direction d) const { return 2 * boundary + (d == Direction::Forward ? 0 : 1); }

  void push(double t, EventType type, int index) { events_.push({t, seq_++, type, index}); }

  void enqueue_transfer(int boundary, Direction d, int iteration, int lo, int hi) {
    links_[link_slot(boundary, d)].queue.push_back({iteration, lo, hi});
  }

  SampleSet bwd_ready(int s, const StageIter& st) const {
    if (s == S_ - 1) return st.fwd_done.minus(st.bwd_taken);
    return st.fwd_done.intersect(st.grad).minus(st.bwd_taken);
  }

  void dispatch(double t) {
    for (int b = 0; b + 1 < S_; ++b) {
      for (Direction d : {Direction::Forward, Direction::Backward}) {
        auto& link = links_[link_slot(b, d)];
        if (link.busy || link.queue.empty()) continue;
        const Pending p = link.queue.front();
        link.queue.pop_front();
        TransferRecord rec;
        rec.boundary = b;
        rec.dir = d;
        rec.iteration = p.iteration;
        rec.sample_begin = p.lo;
        rec.sample_end = p.hi;
        rec.start = t;
        rec.bytes = timing_.bytes(b, p.hi - p.lo);
        rec.end = trace_->transfer_end(b, timing_.links[b], t, rec.bytes);
        link.busy = true;
        link.current = rec;
        push(rec.end, EventType::TransferDone, link_slot(b, d));
      }
    }
    for (int s = 0; s < S_; ++s) {
      if (!stages_[s].busy) try_start(s, t);
    }
  }

  struct Choice {
    OpKind kind;
    int iteration;
    int lo = 0, hi = 0;
  };

  std::optional<Choice> choose(int s) const {
    const int i = stages_[s].iteration;
    if (i >= cfg_.iterations) return std::nullopt;
    const StageIter& st = state_[i][s];
    const Policy pol = cfg_.policy;

    if (st.w_done == batch_ && !st.sync_started) return Choice{OpKind::WeightSync, i};
    if (st.sync_done && !st.opt_started) return Choice{OpKind::OptimizerStep, i};
    if (fuses_weight_update(pol) && !st.w_pending.empty()) {
      return Choice{OpKind::WeightUpdate, i, st.w_pending.front().first, st.w_pending.front().second};
    }

    // Forward candidate.
    std::optional<Choice> fwd;
    int fi = i;
    if (cfg_.async_iterations && st.f_started == batch_ && i + 1 < cfg_.iterations) fi = i + 1;
    const StageIter& fst = state_[fi][s];
    if (fst.f_started < batch_) {
      if (auto run = fst.input.front()) {
        const int chunk = ctl_ ? ctl_->forward_chunk(s, fi) : timing_.microbatch;
        const int size = std::max(1, std::min(chunk, run->second - run->first));
        const int quota = (S_ - s) * timing_.microbatch;
        bool allowed = true;
        if (pol == Policy::OneFOneB) allowed = fst.f_started - fst.b_started + size <= quota;
        if (pol == Policy::ZbOriginal) allowed = fst.f_started - fst.w_started + size <= quota;
        if (allowed) fwd = Choice{OpKind::Forward, fi, run->first, run->first + size};
      }
    }

    std::optional<Choice> bwd;
    if (!(pol == Policy::GPipe && st.f_started < batch_)) {
      if (auto run = bwd_ready(s, st).front()) {
        const int chunk = ctl_ ? ctl_->backward_chunk(s, i) : timing_.microbatch;
        const int size = std::max(1, std::min(chunk, run->second - run->first));
        bwd = Choice{OpKind::Backward, i, run->first, run->first + size};
      }
    }

    std::optional<Choice> wgt;
    if (!st.w_pending.empty()) {
      wgt = Choice{OpKind::WeightUpdate, i, st.w_pending.front().first, st.w_pending.front().second};
    }

    const int quota = (S_ - s) * timing_.microbatch;
    const bool warming = state_[i][s].f_started < quota;
    switch (pol) {
      case Policy::GPipe:
      case Policy::ZbCompact:
        if (fwd) return fwd;
        if (bwd) return bwd;
        return wgt;
      case Policy::OneFOneB:
      case Policy::ZbOriginal:
        if (warming) {
          if (fwd) return fwd;
          if (bwd) return bwd;
        } else {
          if (bwd) return bwd;
          if (fwd) return fwd;
        }
        return wgt;
    }
    return std::nullopt;
  }

  double duration(OpKind k, int s, int samples) const {
    const auto& st = timing_.stages[s];
    const double scale = timing_.scale(samples);
    switch (k) {
      case OpKind::Forward: return st.fwd_s * scale;
      case OpKind::Backward: return st.bwd_s * scale;
      case OpKind::WeightUpdate: return st.wgt_s * scale;
      case OpKind::WeightSync: return st.sync_s;
      case OpKind::OptimizerStep: return st.optimizer_s;
    }
    return 0.0;
  }

  void try_start(int s, double t) {
    const auto c = choose(s);
    if (!c) return;
    StageIter& st = state_[c->iteration][s];
    PipeOp op;
    op.kind = c->kind;
    op.stage = s;
    op.iteration = c->iteration;
    op.sample_begin = c->lo;
    op.sample_end = c->hi;
    op.start = t;
    const int size = c->hi - c->lo;
    switch (c->kind) {
      case OpKind::Forward:
        op.microbatch = st.f_chunks++;
        st.input.remove(c->lo, c->hi);
        st.f_started += size;
        break;
      case OpKind::Backward:
        op.microbatch = st.b_chunks++;
        st.bwd_taken.add(c->lo, c->hi);
        st.b_started += size;
        if (!st.first_bwd) {
          st.first_bwd = true;
          if (ctl_) ctl_->on_first_backward(s, c->iteration, t);
        }
        break;
      case OpKind::WeightUpdate:
        op.microbatch = st.w_chunks++;
        st.w_pending.pop_front();
        st.w_started += size;
        break;
      case OpKind::WeightSync:
        st.sync_started = true;
        op.sample_begin = op.sample_end = 0;
        break;
      case OpKind::OptimizerStep:
        st.opt_started = true;
        op.sample_begin = op.sample_end = 0;
        break;
    }
    op.end = t + duration(c->kind, s, size);
    stages_[s].busy = true;
    stages_[s].op = op;
    push(op.end, EventType::OpDone, s);
  }

  void handle(const Event& e) {
    if (e.type == EventType::TransferDone) {
      auto& link = links_[e.index];
      link.busy = false;
      const TransferRecord rec = link.current;
      if (rec.dir == Direction::Forward) {
        state_[rec.iteration][rec.boundary + 1].input.add(rec.sample_begin, rec.sample_end);
      } else {
        state_[rec.iteration][rec.boundary].grad.add(rec.sample_begin, rec.sample_end);
      }
      out_.transfers.push_back(rec);
      if (ctl_) ctl_->on_transfer(rec);
      return;
    }

    const int s = e.index;
    StageRun& run = stages_[s];
    run.busy = false;
    const PipeOp op = run.op;
    out_.stages[s].push_back(op);
    StageIter& st = state_[op.iteration][s];
    switch (op.kind) {
      case OpKind::Forward:
        st.fwd_done.add(op.sample_begin, op.sample_end);
        if (s + 1 < S_) enqueue_transfer(s, Direction::Forward, op.iteration, op.sample_begin, op.sample_end);
        if (s == 0 && cfg_.async_iterations && st.fwd_done.total() == batch_ && op.iteration + 1 < cfg_.iterations) {
          state_[op.iteration + 1][0].input.add(0, batch_);
        }
        check_forwards_complete(op.iteration, e.t);
        break;
      case OpKind::Backward:
        st.w_pending.emplace_back(op.sample_begin, op.sample_end);
        if (s > 0) enqueue_transfer(s - 1, Direction::Backward, op.iteration, op.sample_begin, op.sample_end);
        break;
      case OpKind::WeightUpdate:
        st.w_done += op.size();
        break;
      case OpKind::WeightSync:
        st.sync_done = true;
        break;
      case OpKind::OptimizerStep:
        st.opt_done = true;
        out_.iteration_end[op.iteration] = std::max(out_.iteration_end[op.iteration], op.end);
        run.iteration = op.iteration + 1;
        if (run.iteration < cfg_.iterations) {
          if (s == 0 && !cfg_.async_iterations) state_[run.iteration][0].input.add(0, batch_);
          if (ctl_) ctl_->on_iteration_start(s, run.iteration, e.t);
        }
        break;
    }
  }

  void check_forwards_complete(int iteration, double t) {
    if (!ctl_ || forwards_complete_.size() > static_cast<std::size_t>(iteration)) return;
    for (int s = 0; s < S_; ++s) {
      if (state_[iteration][s].fwd_done.total() != batch_) return;
    }
    forwards_complete_.resize(iteration + 1);
    ctl_->on_forwards_complete(iteration, t);
  }

  std::string dump() const {
    std::ostringstream os;
    for (int s = 0; s < S_; ++s) {
      const int i = std::min(stages_[s].iteration, cfg_.iterations - 1);
      const auto& st = state_[i][s];
      os << "stage " << s << " iteration " << stages_[s].iteration << ": F " << st.f_started << " B "
         << st.b_started << " W " << st.w_started << "/" << st.w_done << " input " << st.input.total()
         << " grad " << st.grad.total() << " pendingW " << st.w_pending.size() << "\n";
    }
    return os.str();
  }

  const PipelineTiming& timing_;
  EngineConfig cfg_;
  NetworkTrace constant_;
  const NetworkTrace* trace_;
  ChunkController* ctl_;
  int S_ = 0;
  int batch_ = 0;
  std::vector<std::vector<StageIter>> state_;  // [iteration][stage]
  std::vector<StageRun> stages_;
  std::vector<LinkRun> links_;
  std::vector<bool> forwards_complete_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t seq_ = 0;
  Schedule out_;
};

}  // namespace detail
}  // namespace geopipe
