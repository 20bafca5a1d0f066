// Copyright 2026 The dfr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <dfr/scenario_io.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(dfr::read_file(path));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct RunFlags {
  std::string path;
  std::optional<std::uint64_t> seed;
  bool no_failures = false;
  std::string compare;
  std::string trace_out;
};

dfr::Scenario load(const RunFlags& f) {
  auto sc = dfr::load_scenario(f.path);
  if (f.seed) sc.seed = *f.seed;
  if (f.no_failures) sc.failures.clear();
  return sc;
}

int cmd_run(const RunFlags& f) {
  auto sc = load(f);
  dfr::Trace trace;
  try {
    trace = dfr::run(sc);
  } catch (const dfr::SimulationError& e) {
    std::cout << e.trace_prefix();
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  if (f.trace_out.empty()) {
    std::cout << trace.text();
  } else {
    std::ofstream(f.trace_out, std::ios::binary) << trace.text();
  }
  int rc = 0;
  for (const auto& r : trace.recoveries) {
    for (const auto& v : r.violations) {
      std::cerr << "consistency violation: " << v << "\n";
      rc = 4;
    }
  }
  if (!f.compare.empty()) {
    if (auto d = dfr::compare_external(trace.lines, read_lines(f.compare))) {
      std::cerr << "divergence: " << *d << "\n";
      return 2;
    }
    std::cerr << "equal\n";
  }
  return rc;
}

int cmd_choose(const std::string& path) {
  auto s = dfr::load_snapshot(path);
  auto r = dfr::choose_frontiers(s);
  for (const auto& l : r.trace) std::cout << l << "\n";
  std::cout << r.assignment.to_string();
  std::cout << "iterations " << r.iterations << "\n";
  for (const auto& v : dfr::check_consistent(s, r.assignment)) std::cout << "violation " << v.to_string() << "\n";
  return 0;
}

int cmd_oracle(const std::string& path, std::size_t limit) {
  auto s = dfr::load_snapshot(path);
  auto maximal = dfr::brute_force_oracle(s, limit);
  for (std::size_t i = 0; i < maximal.size(); ++i) {
    std::cout << "maximal " << i << "\n" << maximal[i].to_string();
  }
  auto chosen = dfr::choose_frontiers(s).assignment;
  bool member = false, dominates = true;
  for (const auto& a : maximal) {
    member = member || a == chosen;
    dominates = dominates && a.below(chosen);
  }
  std::cout << "choose " << (member ? "is" : "is not") << " maximal, " << (dominates ? "dominates all" : "does not dominate all")
            << "\n";
  return member ? 0 : 1;
}

int cmd_watermarks(const RunFlags& f) {
  std::map<std::string, std::string> marks;
  if (ends_with(f.path, ".json")) {
    dfr::Simulation sim(load(f));
    sim.run();
    for (const auto& [p, w] : sim.monitor().watermarks()) marks[p] = w.to_string();
  } else {
    for (const auto& l : read_lines(f.path)) {
      std::istringstream in(l);
      std::string tag, p, w;
      if (in >> tag >> p >> w && tag == "watermark") marks[p] = w;
    }
  }
  for (const auto& [p, w] : marks) std::cout << p << " " << w << "\n";
  return 0;
}

int cmd_dump(const RunFlags& f) {
  dfr::Simulation sim(load(f));
  sim.run();
  dfr::Snapshot s;
  s.graph = sim.scenario().graph;
  for (const auto& [p, store] : sim.stores()) {
    auto& ps = s.processors[p];
    for (const auto& r : store.records()) {
      if (r.persisted) ps.checkpoints.push_back(r.meta);
    }
  }
  std::cout << dfr::serialize_snapshot(s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rollback recovery simulator for dataflow graphs"};
  app.require_subcommand(1);
  RunFlags flags;
  std::string snapshot;
  std::size_t limit = 1000000;

  auto* run = app.add_subcommand("run", "Run a scenario and print its trace");
  run->add_option("scenario", flags.path, "Scenario file")->required();
  run->add_option("--seed", flags.seed, "Override the scenario seed");
  run->add_flag("--no-failures", flags.no_failures, "Drop the failure schedule");
  run->add_option("--compare", flags.compare, "Compare external outputs against a trace file");
  run->add_option("--trace-out", flags.trace_out, "Write the trace here instead of stdout");

  auto* choose = app.add_subcommand("choose", "Choose rollback frontiers for a snapshot");
  choose->add_option("snapshot", snapshot, "Snapshot file")->required();

  auto* oracle = app.add_subcommand("oracle", "Enumerate maximal consistent assignments");
  oracle->add_option("snapshot", snapshot, "Snapshot file")->required();
  oracle->add_option("--limit", limit, "Maximum number of frontier vectors to enumerate");

  auto* marks = app.add_subcommand("watermarks", "Print final watermarks of a scenario run or trace");
  marks->add_option("input", flags.path, "Scenario (.json) or trace file")->required();
  marks->add_option("--seed", flags.seed, "Override the scenario seed");
  marks->add_flag("--no-failures", flags.no_failures, "Drop the failure schedule");

  auto* dump = app.add_subcommand("dump-checkpoints", "Run a scenario and print persisted checkpoints as a snapshot");
  dump->add_option("scenario", flags.path, "Scenario file")->required();
  dump->add_option("--seed", flags.seed, "Override the scenario seed");
  dump->add_flag("--no-failures", flags.no_failures, "Drop the failure schedule");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(flags);
    if (*choose) return cmd_choose(snapshot);
    if (*oracle) return cmd_oracle(snapshot, limit);
    if (*marks) return cmd_watermarks(flags);
    if (*dump) return cmd_dump(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
