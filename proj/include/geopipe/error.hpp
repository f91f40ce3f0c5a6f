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

#include <stdexcept>
#include <string>
#include <string_view>

namespace geopipe {

enum class Errc {
  InvalidMeasurement,
  InvalidBenchmark,
  IncompleteTopology,
  EmptyCluster,
  InvalidPair,
  InvalidThreshold,
  DegenerateGroup,
  InvalidTopology,
  InvalidPlan,
  InfeasibleSplit,
  Factorization,
  NoFeasiblePlan,
  InvalidTiming,
  InvalidTrace,
  SchedulingBug,
  Parse,
};

constexpr std::string_view to_string(Errc c) {
  switch (c) {
    case Errc::InvalidMeasurement: return "invalid-measurement";
    case Errc::InvalidBenchmark: return "invalid-benchmark";
    case Errc::IncompleteTopology: return "incomplete-topology";
    case Errc::EmptyCluster: return "empty-cluster";
    case Errc::InvalidPair: return "invalid-pair";
    case Errc::InvalidThreshold: return "invalid-threshold";
    case Errc::DegenerateGroup: return "degenerate-group";
    case Errc::InvalidTopology: return "invalid-topology";
    case Errc::InvalidPlan: return "invalid-plan";
    case Errc::InfeasibleSplit: return "infeasible-split";
    case Errc::Factorization: return "factorization";
    case Errc::NoFeasiblePlan: return "no-feasible-plan";
    case Errc::InvalidTiming: return "invalid-timing";
    case Errc::InvalidTrace: return "invalid-trace";
    case Errc::SchedulingBug: return "scheduling-bug";
    case Errc::Parse: return "parse";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace geopipe
