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
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "geopipe/adapter.hpp"
#include "geopipe/costmodel.hpp"
#include "geopipe/error.hpp"
#include "geopipe/grouping.hpp"
#include "geopipe/plan.hpp"
#include "geopipe/profiling.hpp"
#include "geopipe/simulator.hpp"
#include "geopipe/timing.hpp"
#include "geopipe/trace.hpp"

namespace geopipe::io {

using json = nlohmann::json;

inline constexpr const char* kClusterSchema = "geopipe.cluster/1";
inline constexpr const char* kModelSchema = "geopipe.model/1";
inline constexpr const char* kPlanSchema = "geopipe.plan/1";
inline constexpr const char* kTraceSchema = "geopipe.trace/1";
inline constexpr const char* kHierarchySchema = "geopipe.hierarchy/1";
inline constexpr const char* kReportSchema = "geopipe.report/1";
inline constexpr const char* kTimingSchema = "geopipe.timing/1";

namespace detail {

/// Parses text, reporting syntax errors by line and column.
inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(Errc::Parse, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Parse, path + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Parse, path + ": cannot write file");
  out << text;
}

/// Field access with path-qualified diagnostics.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }

  const json& at(const char* key) const {
    if (!j_.is_object() || !j_.contains(key)) fail(key, "missing field");
    return j_.at(key);
  }

  double number(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  double number_or(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::string string(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const char* key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  std::vector<Reader> array(const char* key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(key, "expected an array");
    std::vector<Reader> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.emplace_back(v[i], field(key) + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  std::string field(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw Error(Errc::Parse, field(key) + ": " + msg);
  }

  void expect_schema(const char* schema) const {
    const std::string got = string("schema");
    if (got != schema) fail("schema", "expected '" + std::string(schema) + "', got '" + got + "'");
  }

 private:
  const json& j_;
  std::string path_;
};

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

// ---------------------------------------------------------------- cluster

struct ClusterFile {
  std::vector<DeviceSpec> devices;
  std::vector<LinkMeasurement> links;
};

inline ClusterFile parse_cluster(const json& j) {
  detail::Reader r(j, "");
  r.expect_schema(kClusterSchema);
  ClusterFile f;
  for (const auto& d : r.array("devices")) {
    DeviceSpec spec;
    spec.id = d.string("id");
    const double mem = d.number("memory_bytes");
    if (!(mem > 0)) d.fail("memory_bytes", "must be positive");
    spec.memory_bytes = static_cast<std::uint64_t>(mem);
    spec.region = d.string_or("region", "");
    const auto benches = d.array("benchmarks");
    if (benches.empty()) d.fail("benchmarks", "must not be empty");
    for (const auto& b : benches) {
      BenchmarkSample s;
      s.task = b.string_or("task", "");
      s.seconds = b.number("seconds");
      if (!(s.seconds > 0)) b.fail("seconds", "must be positive");
      if (b.has("weight")) s.weight = b.number("weight");
      spec.benchmarks.push_back(s);
    }
    f.devices.push_back(std::move(spec));
  }
  for (const auto& l : r.array("links")) {
    LinkMeasurement m;
    m.a = l.string("a");
    m.b = l.string("b");
    m.alpha_s = l.number("alpha_s");
    m.beta_s = l.number("beta_s");
    m.payload_bytes = l.number("payload_bytes");
    m.latency_s = l.number("latency_s");
    m.bandwidth_Bps = l.number("bandwidth_Bps");
    for (const char* k : {"alpha_s", "beta_s", "payload_bytes", "bandwidth_Bps"}) {
      if (!(l.number(k) > 0)) l.fail(k, "must be positive");
    }
    if (m.latency_s < 0) l.fail("latency_s", "must be non-negative");
    f.links.push_back(std::move(m));
  }
  return f;
}

inline json to_json(const ClusterFile& f) {
  json devices = json::array();
  for (const auto& d : f.devices) {
    json benches = json::array();
    for (const auto& b : d.benchmarks) {
      json jb{{"task", b.task}, {"seconds", b.seconds}};
      if (b.weight) jb["weight"] = *b.weight;
      benches.push_back(jb);
    }
    devices.push_back({{"id", d.id}, {"memory_bytes", d.memory_bytes}, {"region", d.region}, {"benchmarks", benches}});
  }
  json links = json::array();
  for (const auto& l : f.links) {
    links.push_back({{"a", l.a},
                     {"b", l.b},
                     {"alpha_s", l.alpha_s},
                     {"beta_s", l.beta_s},
                     {"payload_bytes", l.payload_bytes},
                     {"latency_s", l.latency_s},
                     {"bandwidth_Bps", l.bandwidth_Bps}});
  }
  return {{"schema", kClusterSchema}, {"devices", devices}, {"links", links}};
}

inline ClusterFile load_cluster(const std::string& path) {
  return parse_cluster(detail::parse_text(detail::read_file(path), path));
}

// ------------------------------------------------------------------ model

inline ModelSpec parse_model(const json& j) {
  detail::Reader r(j, "");
  r.expect_schema(kModelSchema);
  ModelSpec m;
  m.name = r.string_or("name", "");
  m.optimizer_s = r.number_or("optimizer_s", 0.0);
  if (m.optimizer_s < 0) r.fail("optimizer_s", "must be non-negative");
  for (const auto& l : r.array("layers")) {
    LayerSpec s;
    s.fwd_flops = l.number("fwd_flops");
    s.bwd_input_flops = l.number_or("bwd_input_flops", s.fwd_flops);
    s.bwd_weight_flops = l.number_or("bwd_weight_flops", s.fwd_flops);
    s.activation_out_bytes = l.number("activation_out_bytes");
    s.param_bytes = l.number("param_bytes");
    m.layers.push_back(s);
  }
  for (const auto& b : r.array("batch_candidates")) {
    if (!b.raw().is_number_integer()) throw Error(Errc::Parse, b.path() + ": expected an integer");
    m.batch_candidates.push_back(b.raw().get<int>());
  }
  for (const auto& b : r.array("microbatch_candidates")) {
    if (!b.raw().is_number_integer()) throw Error(Errc::Parse, b.path() + ": expected an integer");
    m.microbatch_candidates.push_back(b.raw().get<int>());
  }
  validate_model(m);
  return m;
}

inline json to_json(const ModelSpec& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"fwd_flops", l.fwd_flops},
                      {"bwd_input_flops", l.bwd_input_flops},
                      {"bwd_weight_flops", l.bwd_weight_flops},
                      {"activation_out_bytes", l.activation_out_bytes},
                      {"param_bytes", l.param_bytes}});
  }
  return {{"schema", kModelSchema},
          {"name", m.name},
          {"optimizer_s", m.optimizer_s},
          {"layers", layers},
          {"batch_candidates", m.batch_candidates},
          {"microbatch_candidates", m.microbatch_candidates}};
}

inline ModelSpec load_model(const std::string& path) {
  return parse_model(detail::parse_text(detail::read_file(path), path));
}

// -------------------------------------------------------------- hierarchy

inline json to_json(const DeviceHierarchy& h, double threshold_net, double threshold_compute) {
  json fgs = json::array();
  for (std::size_t k = 0; k < h.first_level.size(); ++k) {
    const auto& fg = h.first_level[k];
    json sgs = json::array();
    for (const auto& sg : h.second_level[k]) {
      sgs.push_back({{"id", sg.id}, {"members", sg.member_ids}, {"aggregate_capacity", sg.aggregate_capacity}});
    }
    fgs.push_back({{"id", fg.id},
                   {"members", fg.member_ids},
                   {"intra_metric", detail::opt(fg.intra_metric)},
                   {"aggregate_capacity", fg.aggregate_capacity},
                   {"min_intra_bandwidth", detail::opt(fg.min_intra_bandwidth)},
                   {"second_level", sgs}});
  }
  return {{"schema", kHierarchySchema},
          {"threshold_net", threshold_net},
          {"threshold_compute", threshold_compute},
          {"first_level", fgs}};
}

/// Rebuilds a hierarchy for `topo` from its serialized form.
inline DeviceHierarchy parse_hierarchy(const json& j, const ClusterTopology& topo) {
  detail::Reader r(j, "");
  r.expect_schema(kHierarchySchema);
  DeviceHierarchy h;
  auto members_of = [&](const detail::Reader& g) {
    std::vector<std::size_t> idx;
    for (const auto& m : g.array("members")) {
      if (!m.raw().is_string()) throw Error(Errc::Parse, m.path() + ": expected a device id");
      const auto i = topo.index_of(m.raw().get<std::string>());
      if (!i) throw Error(Errc::Parse, m.path() + ": unknown device");
      idx.push_back(*i);
    }
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  for (const auto& g : r.array("first_level")) {
    FirstLevelGroup fg;
    fg.id = g.string("id");
    fg.members = members_of(g);
    fg.member_ids = geopipe::detail::ids_of(fg.members, topo);
    fg.intra_metric = intra_group_metric(fg.members, topo);
    fg.aggregate_capacity = aggregate_capacity(fg.members, topo);
    fg.min_intra_bandwidth = min_intra_bandwidth(fg.members, topo);
    std::vector<SecondLevelGroup> sgs;
    for (const auto& s : g.array("second_level")) {
      SecondLevelGroup sg;
      sg.id = s.string("id");
      sg.parent_fg_id = fg.id;
      sg.members = members_of(s);
      sg.member_ids = geopipe::detail::ids_of(sg.members, topo);
      sg.aggregate_capacity = aggregate_capacity(sg.members, topo);
      sgs.push_back(std::move(sg));
    }
    h.first_level.push_back(std::move(fg));
    h.second_level.push_back(std::move(sgs));
  }
  return h;
}

/// Graphviz view: one cluster box per first-level group, edges labelled with p_t.
inline std::string to_dot(const DeviceHierarchy& h, const ClusterTopology& topo) {
  std::ostringstream os;
  os << "graph hierarchy {\n  node [shape=circle];\n";
  for (std::size_t k = 0; k < h.first_level.size(); ++k) {
    const auto& fg = h.first_level[k];
    os << "  subgraph cluster_" << k << " {\n    label=\"" << fg.id << "\";\n";
    for (const auto& sg : h.second_level[k]) {
      os << "    subgraph cluster_" << k << "_" << &sg - h.second_level[k].data() << " {\n      label=\"" << sg.id
         << "\"; style=dashed;\n";
      for (std::size_t d : sg.members) {
        os << "      \"" << topo.device(d).spec.id << "\" [label=\"" << topo.device(d).spec.id << "\\n"
           << topo.p_c(d) << "\"];\n";
      }
      os << "    }\n";
    }
    os << "  }\n";
  }
  for (std::size_t i = 0; i < topo.size(); ++i) {
    for (std::size_t j = i + 1; j < topo.size(); ++j) {
      os << "  \"" << topo.device(i).spec.id << "\" -- \"" << topo.device(j).spec.id << "\" [label=\""
         << topo.p_t(i, j) << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

// ------------------------------------------------------------------- plan

inline json to_json(const CostBreakdown& c) {
  json stages = json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"fill_s", s.fill_s},
                      {"run_s", s.run_s},
                      {"residual_s", s.residual_s},
                      {"collective_s", s.collective_s},
                      {"total_s", s.total_s},
                      {"compute_s", s.compute_s},
                      {"transfer_s", s.transfer_s}});
  }
  return {{"plan_cost_s", c.feasible() ? json(c.plan_cost) : json("inf")}, {"stages", stages}, {"warnings", c.warnings}};
}

inline json to_json(const ParallelPlan& p, const DeviceHierarchy& h) {
  json stages = json::array();
  for (const auto& s : p.stages) {
    json ranges = json::array();
    for (const auto& r : s.split.pp_ranges) ranges.push_back({r.begin, r.end});
    stages.push_back({{"fg", h.first_level.at(s.fg).id},
                      {"fg_index", s.fg},
                      {"layers", {s.layers.begin, s.layers.end}},
                      {"split",
                       {{"kind", to_string(s.split.kind)},
                        {"ratios", s.split.ratios},
                        {"pp_ranges", ranges},
                        {"fractions", s.split.fractions},
                        {"note", s.split.note}}}});
  }
  return {{"schema", kPlanSchema}, {"batch", p.batch}, {"microbatch", p.microbatch}, {"stages", stages}};
}

inline ParallelPlan parse_plan(const json& j, const DeviceHierarchy& h) {
  detail::Reader r(j, "");
  r.expect_schema(kPlanSchema);
  ParallelPlan p;
  p.batch = static_cast<int>(r.integer("batch"));
  p.microbatch = static_cast<int>(r.integer("microbatch"));
  auto pair_of = [](const detail::Reader& g, const char* key) {
    const json& v = g.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
      g.fail(key, "expected [begin, end]");
    }
    return LayerRange{v[0].get<int>(), v[1].get<int>()};
  };
  for (const auto& s : r.array("stages")) {
    StageAssignment st;
    const std::string fg = s.string("fg");
    auto it = std::find_if(h.first_level.begin(), h.first_level.end(),
                           [&](const FirstLevelGroup& g) { return g.id == fg; });
    if (it == h.first_level.end()) s.fail("fg", "unknown first-level group '" + fg + "'");
    st.fg = static_cast<std::size_t>(it - h.first_level.begin());
    st.layers = pair_of(s, "layers");
    detail::Reader split(s.at("split"), s.field("split"));
    st.split.kind = intra_split_from_string(split.string("kind"));
    for (const auto& x : split.array("ratios")) st.split.ratios.push_back(x.raw().get<double>());
    for (const auto& x : split.array("fractions")) st.split.fractions.push_back(x.raw().get<double>());
    for (const auto& x : split.array("pp_ranges")) {
      const json& v = x.raw();
      if (!v.is_array() || v.size() != 2) throw Error(Errc::Parse, x.path() + ": expected [begin, end]");
      st.split.pp_ranges.push_back({v[0].get<int>(), v[1].get<int>()});
    }
    st.split.note = split.string_or("note", "");
    p.stages.push_back(std::move(st));
  }
  return p;
}

// ----------------------------------------------------------------- timing

inline PipelineTiming parse_timing(const json& j) {
  detail::Reader r(j, "");
  r.expect_schema(kTimingSchema);
  PipelineTiming t;
  t.batch = static_cast<int>(r.integer("batch"));
  t.microbatch = static_cast<int>(r.integer("microbatch"));
  for (const auto& s : r.array("stages")) {
    StageTiming st;
    st.fwd_s = s.number("fwd_s");
    st.bwd_s = s.number_or("bwd_s", st.fwd_s);
    st.wgt_s = s.number_or("wgt_s", st.fwd_s);
    st.sync_s = s.number_or("sync_s", 0.0);
    st.optimizer_s = s.number_or("optimizer_s", 0.0);
    t.stages.push_back(st);
  }
  for (const auto& l : r.array("links")) {
    t.links.push_back({l.number_or("latency_s", 0.0), l.number("bytes"), l.number("bandwidth_Bps")});
  }
  try {
    validate_timing(t);
  } catch (const Error& e) {
    throw Error(Errc::Parse, std::string("timing: ") + e.what());
  }
  return t;
}

inline json to_json(const PipelineTiming& t) {
  json stages = json::array();
  for (const auto& s : t.stages) {
    stages.push_back({{"fwd_s", s.fwd_s},
                      {"bwd_s", s.bwd_s},
                      {"wgt_s", s.wgt_s},
                      {"sync_s", s.sync_s},
                      {"optimizer_s", s.optimizer_s}});
  }
  json links = json::array();
  for (const auto& l : t.links) {
    links.push_back({{"latency_s", l.latency_s}, {"bytes", l.bytes}, {"bandwidth_Bps", l.bandwidth_Bps}});
  }
  return {{"schema", kTimingSchema},
          {"batch", t.batch},
          {"microbatch", t.microbatch},
          {"stages", stages},
          {"links", links}};
}

// ------------------------------------------------------------------ trace

inline NetworkTrace parse_trace(const json& j) {
  detail::Reader r(j, "");
  r.expect_schema(kTraceSchema);
  NetworkTrace t;
  for (const auto& rec : r.array("records")) {
    int link = NetworkTrace::kAllLinks;
    const json& l = rec.at("link");
    if (l.is_string() && l.get<std::string>() == "*") {
      link = NetworkTrace::kAllLinks;
    } else if (l.is_number_integer() && l.get<int>() >= 0) {
      link = l.get<int>();
    } else {
      rec.fail("link", "expected a boundary index or \"*\"");
    }
    try {
      t.add(link, rec.number("t_s"), rec.number("multiplier"));
    } catch (const Error& e) {
      throw Error(Errc::Parse, rec.path() + ": " + e.what());
    }
  }
  return t;
}

inline json to_json(const NetworkTrace& t) {
  json recs = json::array();
  for (const auto& [link, bps] : t.links()) {
    for (const auto& bp : bps) {
      recs.push_back({{"link", link == NetworkTrace::kAllLinks ? json("*") : json(link)},
                      {"t_s", bp.t_s},
                      {"multiplier", bp.multiplier}});
    }
  }
  return {{"schema", kTraceSchema}, {"records", recs}};
}

inline NetworkTrace load_trace(const std::string& path) {
  return parse_trace(detail::parse_text(detail::read_file(path), path));
}

// ----------------------------------------------------------------- report

inline json to_json(const SimReport& r) {
  json actions = json::array();
  for (const auto& a : r.actions) {
    actions.push_back({{"t_s", a.t},
                       {"stage", a.stage},
                       {"direction", to_string(a.dir)},
                       {"old_size", a.old_size},
                       {"new_size", a.new_size},
                       {"signal", a.signal}});
  }
  json transfers = json::array();
  for (const auto& x : r.schedule.transfers) {
    transfers.push_back({{"link", x.boundary},
                         {"direction", to_string(x.dir)},
                         {"iteration", x.iteration},
                         {"samples", {x.sample_begin, x.sample_end}},
                         {"start_s", x.start},
                         {"end_s", x.end}});
  }
  return {{"schema", kReportSchema},
          {"policy", to_string(r.policy)},
          {"adapter", r.adapter_enabled},
          {"seed", r.seed},
          {"iterations", r.schedule.iterations},
          {"batch", r.schedule.batch},
          {"makespan_s", r.makespan},
          {"throughput_sps", r.throughput},
          {"measured_samples", r.measured_samples},
          {"measured_seconds", r.measured_seconds},
          {"bubble_fraction", r.bubble},
          {"iteration_end_s", r.schedule.iteration_end},
          {"adapter_actions", actions},
          {"transfers", transfers}};
}

/// Summary fields of a report file; the per-op schedule is not stored.
struct ReportSummary {
  Policy policy = Policy::ZbCompact;
  bool adapter = false;
  std::uint64_t seed = 0;
  double makespan = 0.0;
  double throughput = 0.0;
  std::vector<double> bubble;
  std::vector<AdapterAction> actions;
};

inline ReportSummary parse_report(const json& j) {
  detail::Reader r(j, "");
  r.expect_schema(kReportSchema);
  ReportSummary s;
  s.policy = policy_from_string(r.string("policy"));
  if (!r.at("adapter").is_boolean()) r.fail("adapter", "expected a boolean");
  s.adapter = r.at("adapter").get<bool>();
  s.seed = r.at("seed").get<std::uint64_t>();
  s.makespan = r.number("makespan_s");
  s.throughput = r.number("throughput_sps");
  for (const auto& b : r.array("bubble_fraction")) s.bubble.push_back(b.raw().get<double>());
  for (const auto& a : r.array("adapter_actions")) {
    AdapterAction act;
    act.t = a.number("t_s");
    act.stage = static_cast<int>(a.integer("stage"));
    act.dir = a.string("direction") == "fwd" ? Direction::Forward : Direction::Backward;
    act.old_size = static_cast<int>(a.integer("old_size"));
    act.new_size = static_cast<int>(a.integer("new_size"));
    act.signal = a.string("signal");
    s.actions.push_back(act);
  }
  return s;
}

/// One row per report; header included.
inline std::string to_csv(const std::vector<SimReport>& reports) {
  std::ostringstream os;
  os.precision(10);
  os << "policy,adapter,makespan_s,throughput_sps,mean_bubble_fraction,adapter_actions\n";
  for (const auto& r : reports) {
    double mean = 0.0;
    for (double b : r.bubble) mean += b;
    if (!r.bubble.empty()) mean /= static_cast<double>(r.bubble.size());
    os << to_string(r.policy) << "," << (r.adapter_enabled ? "on" : "off") << "," << r.makespan << ","
       << r.throughput << "," << mean << "," << r.actions.size() << "\n";
  }
  return os.str();
}

}  // namespace geopipe::io
