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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "geopipe/error.hpp"

namespace geopipe {

/// Per-layer costs. Flops and activation bytes are per sample; parameter
/// bytes are for the whole layer.
struct LayerSpec {
  double fwd_flops = 0.0;
  double bwd_input_flops = 0.0;
  double bwd_weight_flops = 0.0;
  double activation_out_bytes = 0.0;
  double param_bytes = 0.0;

  double total_flops() const noexcept { return fwd_flops + bwd_input_flops + bwd_weight_flops; }
};

struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<int> batch_candidates;
  std::vector<int> microbatch_candidates;
  double optimizer_s = 0.0;  // per stage, once per iteration
};

inline void validate_model(const ModelSpec& m) {
  if (m.layers.empty()) throw Error(Errc::InvalidPlan, "model has no layers");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    if (l.fwd_flops < 0 || l.bwd_input_flops < 0 || l.bwd_weight_flops < 0 || l.activation_out_bytes < 0 ||
        l.param_bytes < 0 || !(l.total_flops() > 0)) {
      throw Error(Errc::InvalidPlan, "layer " + std::to_string(i) + " has negative or zero costs");
    }
  }
  if (m.batch_candidates.empty() || m.microbatch_candidates.empty()) {
    throw Error(Errc::InvalidPlan, "batch and micro-batch candidate lists must be non-empty");
  }
  for (int b : m.batch_candidates) {
    if (b <= 0) throw Error(Errc::InvalidPlan, "batch sizes must be positive");
    for (int mb : m.microbatch_candidates) {
      if (mb <= 0) throw Error(Errc::InvalidPlan, "micro-batch sizes must be positive");
      if (b % mb != 0) {
        throw Error(Errc::InvalidPlan,
                    "micro-batch size " + std::to_string(mb) + " does not divide batch " + std::to_string(b));
      }
    }
  }
}

enum class IntraSplitKind { Uniform, AsymmetricPP, AsymmetricDP, AsymmetricTPDP };

constexpr std::string_view to_string(IntraSplitKind k) {
  switch (k) {
    case IntraSplitKind::Uniform: return "uniform";
    case IntraSplitKind::AsymmetricPP: return "asymmetric-pp";
    case IntraSplitKind::AsymmetricDP: return "asymmetric-dp";
    case IntraSplitKind::AsymmetricTPDP: return "asymmetric-tp-dp";
  }
  return "uniform";
}

inline IntraSplitKind intra_split_from_string(std::string_view s) {
  for (auto k : {IntraSplitKind::Uniform, IntraSplitKind::AsymmetricPP, IntraSplitKind::AsymmetricDP,
                 IntraSplitKind::AsymmetricTPDP}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::Parse, "unknown intra split '" + std::string(s) + "'");
}

struct LayerRange {
  int begin = 0;
  int end = 0;  // exclusive
  int size() const noexcept { return end - begin; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

/// How a stage's work is spread over the second-level groups of its
/// first-level group. `ratios` are SG capacity shares; `pp_ranges` is set for
/// AsymmetricPP, `fractions` for AsymmetricDP.
struct IntraSplit {
  IntraSplitKind kind = IntraSplitKind::Uniform;
  std::vector<double> ratios;
  std::vector<LayerRange> pp_ranges;
  std::vector<double> fractions;
  std::string note;
};

struct StageAssignment {
  std::size_t fg = 0;  // index into the first-level group list
  LayerRange layers;
  IntraSplit split;
};

struct ParallelPlan {
  std::vector<StageAssignment> stages;
  int batch = 0;
  int microbatch = 0;

  int micro_count() const noexcept { return microbatch > 0 ? batch / microbatch : 0; }
};

/// Checks tiling, stage distinctness and batch divisibility.
inline void validate_plan(const ParallelPlan& p, std::size_t layer_count, std::size_t fg_count) {
  if (p.stages.empty()) throw Error(Errc::InvalidPlan, "plan has no stages");
  if (p.microbatch <= 0 || p.batch <= 0 || p.batch % p.microbatch != 0) {
    throw Error(Errc::InvalidPlan, "batch must be a positive multiple of the micro-batch size");
  }
  std::vector<bool> used(fg_count, false);
  int expected = 0;
  for (const auto& s : p.stages) {
    if (s.fg >= fg_count) throw Error(Errc::InvalidPlan, "stage references unknown group");
    if (used[s.fg]) throw Error(Errc::InvalidPlan, "group assigned to two stages");
    used[s.fg] = true;
    if (s.layers.begin != expected || s.layers.end <= s.layers.begin) {
      throw Error(Errc::InvalidPlan, "stage layer ranges must tile the model without gaps");
    }
    expected = s.layers.end;
  }
  if (expected != static_cast<int>(layer_count)) throw Error(Errc::InvalidPlan, "stages do not cover every layer");
}

}  // namespace geopipe
