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

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "geopipe/io.hpp"
#include "geopipe/planner.hpp"
#include "geopipe/simulator.hpp"
#include "geopipe/timeline.hpp"

namespace fs = std::filesystem;
using namespace geopipe;

namespace {

struct RunConfig {
  std::string cluster, model, plan, trace, timing;
  std::vector<std::string> policies;
  bool adapter = false;
  std::uint64_t seed = 0;
  int iterations = 3;
  double threshold_net = kDefaultGroupingThreshold;
  double threshold_compute = kDefaultGroupingThreshold;
  int beam_width = 8;
  int max_iter = 20;
  bool exhaustive = false;
  bool dot = false;
  std::string out;
};

// Inputs shared by the commands that need a cluster.
struct Loaded {
  ClusterTopology topology;
  DeviceHierarchy hierarchy;
  std::optional<ModelSpec> model;
};

Loaded load_cluster(const RunConfig& cfg, bool need_model) {
  auto file = io::load_cluster(cfg.cluster);
  Loaded l{build_topology(std::move(file.devices), file.links), {}, std::nullopt};
  l.hierarchy = build_hierarchy(l.topology, cfg.threshold_net, cfg.threshold_compute);
  if (need_model) l.model = io::load_model(cfg.model);
  return l;
}

ParallelPlan load_plan(const RunConfig& cfg, const DeviceHierarchy& h) {
  const std::string text = io::detail::read_file(cfg.plan);
  return io::parse_plan(io::detail::parse_text(text, cfg.plan), h);
}

void emit(const RunConfig& cfg, const std::string& name, const std::string& text) {
  if (cfg.out.empty()) return;
  fs::create_directories(cfg.out);
  io::detail::write_file((fs::path(cfg.out) / name).string(), text);
}

std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

void print_cost_table(const CostBreakdown& c) {
  std::cout << std::left << std::setw(7) << "stage" << std::right;
  for (const char* h : {"compute_s", "transfer_s", "fill_s", "run_s", "residual_s", "collective_s", "total_s"}) {
    std::cout << std::setw(14) << h;
  }
  std::cout << "\n" << std::setprecision(6);
  for (std::size_t s = 0; s < c.stages.size(); ++s) {
    const auto& x = c.stages[s];
    std::cout << std::left << std::setw(7) << s << std::right;
    for (double v : {x.compute_s, x.transfer_s, x.fill_s, x.run_s, x.residual_s, x.collective_s, x.total_s}) {
      std::cout << std::setw(14) << v;
    }
    std::cout << "\n";
  }
  std::cout << "plan_cost_s " << c.plan_cost << "\n";
  for (const auto& w : c.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_group(const RunConfig& cfg) {
  const auto l = load_cluster(cfg, false);
  const std::string text = dump(io::to_json(l.hierarchy, cfg.threshold_net, cfg.threshold_compute));
  std::cout << text;
  emit(cfg, "hierarchy.json", text);
  if (cfg.dot) {
    const std::string dot = io::to_dot(l.hierarchy, l.topology);
    if (cfg.out.empty()) std::cout << dot;
    emit(cfg, "hierarchy.dot", dot);
  }
  return 0;
}

int cmd_cost(const RunConfig& cfg) {
  const auto l = load_cluster(cfg, true);
  const CostContext ctx{*l.model, l.topology, l.hierarchy};
  const auto plan = load_plan(cfg, l.hierarchy);
  const auto cost = plan_cost(plan, ctx);
  print_cost_table(cost);
  emit(cfg, "cost.json", dump(io::to_json(cost)));
  return 0;
}

int cmd_plan(const RunConfig& cfg) {
  const auto l = load_cluster(cfg, true);
  const CostContext ctx{*l.model, l.topology, l.hierarchy};
  SearchConfig sc;
  sc.beam_width = cfg.beam_width;
  sc.max_iter = cfg.max_iter;
  sc.seed = cfg.seed;
  const SearchResult r = cfg.exhaustive ? exhaustive_plan(ctx, sc.bottleneck_factor) : search_plan(ctx, sc);
  auto j = io::to_json(r.plan, l.hierarchy);
  j["cost"] = io::to_json(r.cost);
  j["search"] = {{"method", cfg.exhaustive ? "exhaustive" : "beam"},
                 {"seed", cfg.seed},
                 {"evaluations", r.evaluations},
                 {"cost_per_sample_s", r.cost_per_sample},
                 {"warnings", r.warnings}};
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  const std::string text = dump(j);
  std::cout << text;
  emit(cfg, "plan.json", text);
  return 0;
}

PipelineTiming resolve_timing(const RunConfig& cfg) {
  if (!cfg.timing.empty()) {
    return io::parse_timing(io::detail::parse_text(io::detail::read_file(cfg.timing), cfg.timing));
  }
  if (cfg.cluster.empty() || cfg.model.empty() || cfg.plan.empty()) {
    throw Error(Errc::Parse, "need --timing, or --cluster with --model and --plan");
  }
  const auto l = load_cluster(cfg, true);
  const CostContext ctx{*l.model, l.topology, l.hierarchy};
  return derive_timing(load_plan(cfg, l.hierarchy), ctx);
}

NetworkTrace resolve_trace(const RunConfig& cfg) { return cfg.trace.empty() ? NetworkTrace{} : io::load_trace(cfg.trace); }

SimConfig sim_config(const RunConfig& cfg) {
  SimConfig sc;
  sc.iterations = cfg.iterations;
  sc.warmup_iterations = cfg.iterations > 1 ? 1 : 0;
  sc.seed = cfg.seed;
  return sc;
}

Policy single_policy(const RunConfig& cfg) {
  if (cfg.policies.size() > 1) throw Error(Errc::Parse, "--policy: expected one policy for this command");
  return cfg.policies.empty() ? Policy::ZbCompact : policy_from_string(cfg.policies.front());
}

int cmd_simulate(const RunConfig& cfg) {
  const auto timing = resolve_timing(cfg);
  const auto report = simulate(timing, single_policy(cfg), resolve_trace(cfg), cfg.adapter, sim_config(cfg));
  const std::string text = dump(io::to_json(report));
  std::cout << text;
  emit(cfg, "report.json", text);
  emit(cfg, "report.csv", io::to_csv({report}));
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  const auto timing = resolve_timing(cfg);
  const auto trace = resolve_trace(cfg);
  std::vector<Policy> policies;
  for (const auto& p : cfg.policies) policies.push_back(policy_from_string(p));
  if (policies.empty()) policies.assign(std::begin(kAllPolicies), std::end(kAllPolicies));
  std::vector<SimReport> reports;
  io::json all = io::json::array();
  for (Policy p : policies) {
    for (bool on : {false, true}) {
      if (on && !cfg.adapter) continue;
      reports.push_back(simulate(timing, p, trace, on, sim_config(cfg)));
      all.push_back(io::to_json(reports.back()));
    }
  }
  const std::string csv = io::to_csv(reports);
  std::cout << csv;
  emit(cfg, "compare.csv", csv);
  emit(cfg, "compare.json", dump(all));
  return 0;
}

int cmd_export_timeline(const RunConfig& cfg) {
  const auto timing = resolve_timing(cfg);
  const auto report = simulate(timing, single_policy(cfg), resolve_trace(cfg), cfg.adapter, sim_config(cfg));
  const std::string text = to_trace_events(report.schedule).dump() + "\n";
  if (cfg.out.empty()) {
    std::cout << text;
  } else {
    emit(cfg, "timeline.json", text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geopipe: device grouping, pipeline planning and schedule simulation"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto existing = [](CLI::Option* o) { return o->check(CLI::ExistingFile); };
  auto cluster_opt = [&](CLI::App* sub, bool required) {
    auto* o = existing(sub->add_option("--cluster", cfg.cluster, "cluster file (geopipe.cluster/1)"));
    if (required) o->required();
    sub->add_option("--threshold-net", cfg.threshold_net, "first-level merge threshold");
    sub->add_option("--threshold-compute", cfg.threshold_compute, "second-level merge threshold");
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--out", cfg.out, "output directory");
  };
  auto sim_opts = [&](CLI::App* sub, bool many_policies) {
    cluster_opt(sub, false);
    existing(sub->add_option("--model", cfg.model, "model file (geopipe.model/1)"));
    existing(sub->add_option("--plan", cfg.plan, "plan file (geopipe.plan/1)"));
    existing(sub->add_option("--timing", cfg.timing, "stage timing file (geopipe.timing/1), replaces cluster/model/plan"));
    existing(sub->add_option("--trace", cfg.trace, "bandwidth trace (geopipe.trace/1)"));
    auto* p = sub->add_option("--policy", cfg.policies, many_policies ? "policies to compare" : "schedule policy");
    if (!many_policies) p->expected(1);
    p->check(CLI::IsMember({"GPIPE", "ONE_F_ONE_B", "ZB_ORIGINAL", "ZB_COMPACT"}));
    sub->add_flag("--adapter", cfg.adapter, "enable adaptive micro-batching");
    sub->add_option("--iterations", cfg.iterations, "training iterations")->check(CLI::PositiveNumber);
    common(sub);
  };

  auto* group = app.add_subcommand("group", "build the two-level device hierarchy");
  cluster_opt(group, true);
  group->add_flag("--dot", cfg.dot, "also emit a DOT graph");
  common(group);

  auto* cost = app.add_subcommand("cost", "evaluate a plan with the cost model");
  cluster_opt(cost, true);
  existing(cost->add_option("--model", cfg.model, "model file"))->required();
  existing(cost->add_option("--plan", cfg.plan, "plan file"))->required();
  common(cost);

  auto* plan = app.add_subcommand("plan", "search for a parallel plan");
  cluster_opt(plan, true);
  existing(plan->add_option("--model", cfg.model, "model file"))->required();
  plan->add_option("--beam-width", cfg.beam_width, "beam width")->check(CLI::PositiveNumber);
  plan->add_option("--max-iter", cfg.max_iter, "search iterations")->check(CLI::PositiveNumber);
  plan->add_flag("--exhaustive", cfg.exhaustive, "enumerate every plan (tiny inputs only)");
  common(plan);

  auto* sim = app.add_subcommand("simulate", "simulate one policy");
  sim_opts(sim, false);
  auto* cmp = app.add_subcommand("compare", "sweep policies, optionally with the adapter");
  sim_opts(cmp, true);
  auto* tl = app.add_subcommand("export-timeline", "write a Chrome trace-event timeline");
  sim_opts(tl, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*group) return cmd_group(cfg);
    if (*cost) return cmd_cost(cfg);
    if (*plan) return cmd_plan(cfg);
    if (*sim) return cmd_simulate(cfg);
    if (*cmp) return cmd_compare(cfg);
    if (*tl) return cmd_export_timeline(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
