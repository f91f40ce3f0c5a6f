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

#include <string>

#include "json.hpp"

#include "geopipe/engine.hpp"

namespace geopipe {

/// Chrome trace-event view of a schedule: one thread per stage, times in µs.
/// Transfers go on a second process, one thread per link direction.
inline nlohmann::json to_trace_events(const Schedule& sched) {
  using nlohmann::json;
  json events = json::array();
  events.push_back({{"name", "process_name"}, {"ph", "M"}, {"pid", 0}, {"args", {{"name", "stages"}}}});
  events.push_back({{"name", "process_name"}, {"ph", "M"}, {"pid", 1}, {"args", {{"name", "links"}}}});
  for (std::size_t s = 0; s < sched.stages.size(); ++s) {
    events.push_back({{"name", "thread_name"},
                      {"ph", "M"},
                      {"pid", 0},
                      {"tid", s},
                      {"args", {{"name", "stage " + std::to_string(s)}}}});
    for (const auto& op : sched.stages[s]) {
      std::string name(to_string(op.kind));
      if (op.microbatch >= 0) name += std::to_string(op.microbatch);
      events.push_back({{"name", name},
                        {"cat", std::string(to_string(op.kind))},
                        {"ph", "X"},
                        {"pid", 0},
                        {"tid", s},
                        {"ts", op.start * 1e6},
                        {"dur", (op.end - op.start) * 1e6},
                        {"args",
                         {{"iteration", op.iteration},
                          {"samples", {op.sample_begin, op.sample_end}}}}});
    }
  }
  for (const auto& x : sched.transfers) {
    const int tid = 2 * x.boundary + (x.dir == Direction::Forward ? 0 : 1);
    events.push_back({{"name", std::string(x.dir == Direction::Forward ? "act" : "grad") + " " +
                                   std::to_string(x.sample_begin) + "-" + std::to_string(x.sample_end)},
                      {"cat", "transfer"},
                      {"ph", "X"},
                      {"pid", 1},
                      {"tid", tid},
                      {"ts", x.start * 1e6},
                      {"dur", (x.end - x.start) * 1e6},
                      {"args", {{"link", x.boundary}, {"iteration", x.iteration}, {"bytes", x.bytes}}}});
  }
  return {{"traceEvents", events}, {"displayTimeUnit", "ms"}};
}

}  // namespace geopipe
