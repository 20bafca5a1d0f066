/*
 * Copyright 2026 The dfr Authors.
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

#include <dfr/simulator.hpp>

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dfr {

using Json = nlohmann::json;

namespace detail {

inline std::string pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

/// Source line of every value in a JSON document, keyed by JSON pointer.
inline std::map<std::string, int> line_index(const std::string& text) {
  struct Frame {
    bool array;
    std::string base;
    std::string key;
    int index = 0;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  bool expect_key = false;
  int line = 1;
  auto here = [&]() -> std::string {
    if (stack.empty()) return "";
    const auto& f = stack.back();
    return f.base + "/" + (f.array ? std::to_string(f.index) : pointer_token(f.key));
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        if (text[i] == '\n') ++line;
        s += text[i];
      }
      if (!stack.empty() && !stack.back().array && expect_key) {
        stack.back().key = s;
        expect_key = false;
      }
      lines.emplace(here(), line);
    } else if (c == '{' || c == '[') {
      auto ptr = here();
      lines.emplace(ptr, line);
      stack.push_back(Frame{c == '[', ptr, {}, 0});
      expect_key = c == '{';
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
      expect_key = false;
    } else if (c == ',') {
      if (!stack.empty() && stack.back().array) {
        ++stack.back().index;
      } else {
        expect_key = true;
      }
    } else if (!std::isspace(static_cast<unsigned char>(c)) && c != ':') {
      lines.emplace(here(), line);
    }
  }
  return lines;
}

/// Typed access to a parsed document with line-anchored errors.
class Reader {
 public:
  Reader(std::string source, const std::string& text) : source_(std::move(source)), lines_(line_index(text)) {
    try {
      root_ = Json::parse(text);
    } catch (const Json::parse_error& e) {
      int line = 1;
      for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
      throw Error(source_ + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
    }
  }

  const Json& root() const noexcept { return root_; }

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    int line = 1;
    for (auto p = ptr;; p = p.substr(0, p.rfind('/'))) {
      if (auto it = lines_.find(p); it != lines_.end()) {
        line = it->second;
        break;
      }
      if (p.empty()) break;
    }
    throw Error(source_ + ":" + std::to_string(line) + ": " + msg + (ptr.empty() ? "" : " (at " + ptr + ")"));
  }

  void keys(const Json& j, const std::string& ptr, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(ptr, "expected an object");
    for (const auto& [k, v] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail(ptr + "/" + pointer_token(k), "unknown key '" + k + "'");
    }
  }

  const Json& need(const Json& j, const std::string& ptr, const char* key) const {
    if (!j.contains(key)) fail(ptr, std::string("missing key '") + key + "'");
    return j.at(key);
  }

  std::string str(const Json& j, const std::string& ptr) const {
    if (!j.is_string()) fail(ptr, "expected a string");
    return j.get<std::string>();
  }

  std::int64_t integer(const Json& j, const std::string& ptr) const {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    return j.get<std::int64_t>();
  }

  bool boolean(const Json& j, const std::string& ptr) const {
    if (!j.is_boolean()) fail(ptr, "expected true or false");
    return j.get<bool>();
  }

  /// Runs `f`, re-anchoring any library error at `ptr`.
  template <class F>
  auto at(const std::string& ptr, F&& f) const {
    try {
      return f();
    } catch (const Error& e) {
      fail(ptr, e.what());
    }
  }

 private:
  std::string source_;
  std::map<std::string, int> lines_;
  Json root_;
};

template <class E>
struct NameTable {
  std::vector<std::pair<const char*, E>> entries;

  E parse(const Reader& r, const Json& j, const std::string& ptr, const char* what) const {
    auto s = r.str(j, ptr);
    for (const auto& [n, e] : entries) {
      if (s == n) return e;
    }
    r.fail(ptr, std::string("unknown ") + what + " '" + s + "'");
  }
  std::string name(E e) const {
    for (const auto& [n, x] : entries) {
      if (x == e) return n;
    }
    return {};
  }
};

inline const NameTable<BehaviorKind>& behavior_names() {
  static const NameTable<BehaviorKind> t{{{"select", BehaviorKind::Select},
                                           {"sum", BehaviorKind::Sum},
                                           {"buffer", BehaviorKind::Buffer},
                                           {"relay", BehaviorKind::StatelessRelay},
                                           {"epoch_barrier", BehaviorKind::EpochBarrier},
                                           {"loop_ingress", BehaviorKind::LoopIngress},
                                           {"loop_egress_increment", BehaviorKind::LoopEgressIncrement},
                                           {"keyed", BehaviorKind::KeyedStateful},
                                           {"ingress", BehaviorKind::IngressSource},
                                           {"egress", BehaviorKind::EgressSink}}};
  return t;
}

inline const NameTable<PolicyKind>& policy_names() {
  static const NameTable<PolicyKind> t{{{"ephemeral", PolicyKind::Ephemeral},
                                         {"eager", PolicyKind::EagerPerEvent},
                                         {"lazy", PolicyKind::LazyOnCompletion},
                                         {"log_all", PolicyKind::LogAllHistory},
                                         {"log_sent", PolicyKind::LogSentMessages}}};
  return t;
}

inline const NameTable<ProjectionKind>& projection_names() {
  static const NameTable<ProjectionKind> t{{{"identity", ProjectionKind::Identity},
                                             {"sent_count", ProjectionKind::SentCount},
                                             {"loop_ingress", ProjectionKind::LoopIngress},
                                             {"loop_egress", ProjectionKind::LoopEgress},
                                             {"feedback", ProjectionKind::Feedback},
                                             {"epoch_to_seq", ProjectionKind::EpochToSeq},
                                             {"seq_to_epoch", ProjectionKind::SeqToEpoch}}};
  return t;
}

inline const NameTable<ExternalRole>& role_names() {
  static const NameTable<ExternalRole> t{
      {{"none", ExternalRole::None}, {"ingress", ExternalRole::Ingress}, {"egress", ExternalRole::Egress}}};
  return t;
}

inline const NameTable<SchedulePolicy>& schedule_names() {
  static const NameTable<SchedulePolicy> t{{{"fifo", SchedulePolicy::Fifo}, {"random", SchedulePolicy::RandomEligible}}};
  return t;
}

}  // namespace detail

namespace detail {

inline BehaviorSpec parse_behavior(const Reader& r, const Json& j, const std::string& ptr) {
  BehaviorSpec b;
  if (j.is_string()) {
    b.kind = behavior_names().parse(r, j, ptr, "behavior");
    return b;
  }
  r.keys(j, ptr, {"kind", "function", "max_iterations"});
  b.kind = behavior_names().parse(r, r.need(j, ptr, "kind"), ptr + "/kind", "behavior");
  if (j.contains("function")) b.function = r.str(j["function"], ptr + "/function");
  if (j.contains("max_iterations")) b.max_iterations = r.integer(j["max_iterations"], ptr + "/max_iterations");
  return b;
}

inline PolicySpec parse_policy(const Reader& r, const Json& j, const std::string& ptr) {
  PolicySpec p;
  if (j.is_string()) {
    p.kind = policy_names().parse(r, j, ptr, "policy");
    return p;
  }
  r.keys(j, ptr, {"kind", "period", "log_outputs"});
  p.kind = policy_names().parse(r, r.need(j, ptr, "kind"), ptr + "/kind", "policy");
  if (j.contains("period")) p.period = static_cast<int>(r.integer(j["period"], ptr + "/period"));
  if (j.contains("log_outputs")) p.log_outputs = r.boolean(j["log_outputs"], ptr + "/log_outputs");
  return p;
}

inline ProjectionSpec parse_projection(const Reader& r, const Json& j, const std::string& ptr) {
  ProjectionSpec p;
  if (j.is_string()) {
    p.kind = projection_names().parse(r, j, ptr, "projection");
    return p;
  }
  r.keys(j, ptr, {"kind", "window"});
  p.kind = projection_names().parse(r, r.need(j, ptr, "kind"), ptr + "/kind", "projection");
  if (j.contains("window")) p.window = r.integer(j["window"], ptr + "/window");
  return p;
}

inline GraphSpec parse_graph(const Reader& r, const Json& j, const std::string& ptr) {
  r.keys(j, ptr, {"processors", "edges"});
  std::vector<ProcessorDecl> procs;
  std::vector<EdgeDecl> edges;
  const auto& ps = r.need(j, ptr, "processors");
  if (!ps.is_array()) r.fail(ptr + "/processors", "expected an array");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto at = ptr + "/processors/" + std::to_string(i);
    const auto& pj = ps[i];
    r.keys(pj, at, {"id", "domain", "behavior", "policy", "role", "nondeterministic"});
    ProcessorDecl d;
    d.id = r.str(r.need(pj, at, "id"), at + "/id");
    d.domain = r.at(at + "/domain", [&] { return TimeDomain::parse(r.str(r.need(pj, at, "domain"), at + "/domain")); });
    d.behavior = parse_behavior(r, r.need(pj, at, "behavior"), at + "/behavior");
    if (pj.contains("policy")) d.policy = parse_policy(r, pj["policy"], at + "/policy");
    if (pj.contains("role")) d.role = role_names().parse(r, pj["role"], at + "/role", "role");
    if (pj.contains("nondeterministic")) d.nondeterministic = r.boolean(pj["nondeterministic"], at + "/nondeterministic");
    procs.push_back(std::move(d));
  }
  if (j.contains("edges")) {
    const auto& es = j["edges"];
    if (!es.is_array()) r.fail(ptr + "/edges", "expected an array");
    for (std::size_t i = 0; i < es.size(); ++i) {
      const auto at = ptr + "/edges/" + std::to_string(i);
      const auto& ej = es[i];
      r.keys(ej, at, {"id", "src", "dst", "projection"});
      EdgeDecl e;
      e.id = r.str(r.need(ej, at, "id"), at + "/id");
      e.src = r.str(r.need(ej, at, "src"), at + "/src");
      e.dst = r.str(r.need(ej, at, "dst"), at + "/dst");
      if (ej.contains("projection")) e.projection = parse_projection(r, ej["projection"], at + "/projection");
      edges.push_back(std::move(e));
    }
  }
  GraphSpec g(std::move(procs), std::move(edges));
  if (auto v = validate_graph(g); !v.empty()) r.fail(ptr, "invalid graph: " + v.front());
  return g;
}

inline Json graph_json(const GraphSpec& g) {
  Json procs = Json::array();
  for (const auto& d : g.processors()) {
    procs.push_back({{"id", d.id},
                     {"domain", d.domain.to_string()},
                     {"behavior",
                      {{"kind", behavior_names().name(d.behavior.kind)},
                       {"function", d.behavior.function},
                       {"max_iterations", d.behavior.max_iterations}}},
                     {"policy",
                      {{"kind", policy_names().name(d.policy.kind)},
                       {"period", d.policy.period},
                       {"log_outputs", d.policy.log_outputs}}},
                     {"role", role_names().name(d.role)},
                     {"nondeterministic", d.nondeterministic}});
  }
  Json edges = Json::array();
  for (const auto& e : g.edges()) {
    edges.push_back({{"id", e.id},
                     {"src", e.src},
                     {"dst", e.dst},
                     {"projection", {{"kind", projection_names().name(e.projection.kind)}, {"window", e.projection.window}}}});
  }
  return {{"processors", procs}, {"edges", edges}};
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& source = "scenario") {
  detail::Reader r(source, text);
  const auto& j = r.root();
  r.keys(j, "", {"name", "graph", "inputs", "failures", "seed", "schedule", "limits"});
  Scenario sc;
  if (j.contains("name")) sc.name = r.str(j["name"], "/name");
  sc.graph = detail::parse_graph(r, r.need(j, "", "graph"), "/graph");
  if (j.contains("seed")) sc.seed = static_cast<std::uint64_t>(r.integer(j["seed"], "/seed"));
  if (j.contains("schedule")) sc.schedule = detail::schedule_names().parse(r, j["schedule"], "/schedule", "schedule");
  if (j.contains("limits")) {
    const auto& l = j["limits"];
    r.keys(l, "/limits", {"max_steps", "min_latency", "max_latency"});
    if (l.contains("max_steps")) sc.max_steps = r.integer(l["max_steps"], "/limits/max_steps");
    if (l.contains("min_latency")) sc.min_latency = r.integer(l["min_latency"], "/limits/min_latency");
    if (l.contains("max_latency")) sc.max_latency = r.integer(l["max_latency"], "/limits/max_latency");
  }
  if (j.contains("inputs")) {
    const auto& in = j["inputs"];
    if (!in.is_object()) r.fail("/inputs", "expected an object");
    for (const auto& [p, batches] : in.items()) {
      const auto at = "/inputs/" + detail::pointer_token(p);
      if (!sc.graph.has_processor(p)) r.fail(at, "inputs for unknown processor '" + p + "'");
      if (!batches.is_array()) r.fail(at, "expected an array");
      const auto& dom = sc.graph.processor(p).domain;
      auto& out = sc.inputs[p];
      for (std::size_t i = 0; i < batches.size(); ++i) {
        const auto bat = at + "/" + std::to_string(i);
        const auto& bj = batches[i];
        r.keys(bj, bat, {"batch", "time", "payloads"});
        InputBatch b;
        b.id = r.str(r.need(bj, bat, "batch"), bat + "/batch");
        b.time = r.at(bat + "/time", [&] { return parse_time(dom, r.str(r.need(bj, bat, "time"), bat + "/time")); });
        const auto& pl = r.need(bj, bat, "payloads");
        if (!pl.is_array()) r.fail(bat + "/payloads", "expected an array");
        for (std::size_t k = 0; k < pl.size(); ++k) b.payloads.push_back(r.integer(pl[k], bat + "/payloads/" + std::to_string(k)));
        out.push_back(std::move(b));
      }
    }
  }
  if (j.contains("failures")) {
    const auto& fs = j["failures"];
    if (!fs.is_array()) r.fail("/failures", "expected an array");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto at = "/failures/" + std::to_string(i);
      r.keys(fs[i], at, {"step", "processors"});
      FailureSpec f;
      f.step = r.integer(r.need(fs[i], at, "step"), at + "/step");
      const auto& ps = r.need(fs[i], at, "processors");
      if (!ps.is_array()) r.fail(at + "/processors", "expected an array");
      for (std::size_t k = 0; k < ps.size(); ++k) f.processors.push_back(r.str(ps[k], at + "/processors/" + std::to_string(k)));
      sc.failures.push_back(std::move(f));
    }
  }
  if (auto v = validate_scenario(sc); !v.empty()) r.fail("", v.front());
  return sc;
}

inline Json scenario_json(const Scenario& sc) {
  Json inputs = Json::object();
  for (const auto& [p, batches] : sc.inputs) {
    const auto& dom = sc.graph.processor(p).domain;
    Json arr = Json::array();
    for (const auto& b : batches) arr.push_back({{"batch", b.id}, {"time", to_string(dom, b.time)}, {"payloads", b.payloads}});
    inputs[p] = arr;
  }
  Json failures = Json::array();
  for (const auto& f : sc.failures) failures.push_back({{"step", f.step}, {"processors", f.processors}});
  return {{"name", sc.name},
          {"seed", sc.seed},
          {"schedule", detail::schedule_names().name(sc.schedule)},
          {"limits", {{"max_steps", sc.max_steps}, {"min_latency", sc.min_latency}, {"max_latency", sc.max_latency}}},
          {"graph", detail::graph_json(sc.graph)},
          {"inputs", inputs},
          {"failures", failures}};
}

inline std::string serialize_scenario(const Scenario& sc) { return scenario_json(sc).dump(2) + "\n"; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path), path); }

/// Snapshot documents: a graph plus, per processor, its F* chain of metadata.
/// Omitted estimates are EMPTY; omitted projections are computed, which
/// requires a static projection kind.
inline Snapshot parse_snapshot(const std::string& text, const std::string& source = "snapshot") {
  detail::Reader r(source, text);
  const auto& j = r.root();
  r.keys(j, "", {"graph", "processors"});
  Snapshot s;
  s.graph = detail::parse_graph(r, r.need(j, "", "graph"), "/graph");
  const auto& g = s.graph;
  const auto& ps = r.need(j, "", "processors");
  if (!ps.is_object()) r.fail("/processors", "expected an object");
  for (const auto& [p, pj] : ps.items()) {
    const auto at = "/processors/" + detail::pointer_token(p);
    if (!g.has_processor(p)) r.fail(at, "unknown processor '" + p + "'");
    r.keys(pj, at, {"failed", "checkpoints"});
    auto& snap = s.processors[p];
    if (pj.contains("failed")) snap.failed = r.boolean(pj["failed"], at + "/failed");
    const auto& dom = g.processor(p).domain;
    const auto& cs = r.need(pj, at, "checkpoints");
    if (!cs.is_array()) r.fail(at + "/checkpoints", "expected an array");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const auto cat = at + "/checkpoints/" + std::to_string(i);
      const auto& cj = cs[i];
      r.keys(cj, cat, {"f", "nbar", "mbar", "dbar", "phi"});
      auto frontier = [&](const TimeDomain& d, const Json& v, const std::string& ptr) {
        return r.at(ptr, [&] { return Frontier::parse(d, r.str(v, ptr)); });
      };
      CheckpointMetadata m;
      m.processor = p;
      m.f = frontier(dom, r.need(cj, cat, "f"), cat + "/f");
      m.nbar = cj.contains("nbar") ? frontier(dom, cj["nbar"], cat + "/nbar") : Frontier::empty(dom);
      auto per_edge = [&](const char* key, const std::vector<std::string>& edges, bool src_side) {
        std::map<std::string, Frontier> out;
        const auto kat = cat + "/" + key;
        Json obj = cj.contains(key) ? cj[key] : Json::object();
        if (!obj.is_object()) r.fail(kat, "expected an object");
        for (const auto& [e, v] : obj.items()) {
          if (std::find(edges.begin(), edges.end(), e) == edges.end()) {
            r.fail(kat + "/" + detail::pointer_token(e), "edge '" + e + "' is not " + (src_side ? "an input" : "an output") + " of '" + p + "'");
          }
        }
        for (const auto& e : edges) {
          const auto& d = src_side ? dom : g.dst_domain(e);
          out.emplace(e, obj.contains(e) ? frontier(d, obj[e], kat + "/" + detail::pointer_token(e)) : Frontier::empty(d));
        }
        return out;
      };
      m.mbar = per_edge("mbar", g.in_edges(p), true);
      m.dbar = per_edge("dbar", g.out_edges(p), false);
      const Json phi = cj.contains("phi") ? cj["phi"] : Json::object();
      if (!phi.is_object()) r.fail(cat + "/phi", "expected an object");
      for (const auto& e : g.out_edges(p)) {
        const auto eat = cat + "/phi/" + detail::pointer_token(e);
        if (phi.contains(e)) {
          m.phi.emplace(e, frontier(g.dst_domain(e), phi[e], eat));
        } else {
          m.phi.emplace(e, r.at(cat, [&] { return apply_projection(g, e, m.f); }));
        }
      }
      for (const auto& [e, v] : phi.items()) {
        if (!m.phi.count(e)) r.fail(cat + "/phi/" + detail::pointer_token(e), "edge '" + e + "' is not an output of '" + p + "'");
      }
      if (auto v = m.violations(); !v.empty()) r.fail(cat, v.front());
      if (!snap.checkpoints.empty() && !snap.checkpoints.back().f.strict_subset_of(m.f)) {
        r.fail(cat + "/f", "checkpoint frontiers must form a strictly increasing chain");
      }
      snap.checkpoints.push_back(std::move(m));
    }
    if (snap.checkpoints.empty() || !snap.checkpoints.front().f.is_empty()) {
      r.fail(at + "/checkpoints", "the first checkpoint must be at EMPTY");
    }
  }
  for (const auto& d : g.processors()) {
    if (!s.processors.count(d.id)) r.fail("/processors", "missing checkpoints for '" + d.id + "'");
  }
  return s;
}

inline Json snapshot_json(const Snapshot& s) {
  Json procs = Json::object();
  for (const auto& [p, ps] : s.processors) {
    Json cs = Json::array();
    for (const auto& m : ps.checkpoints) {
      Json c = {{"f", m.f.to_string()}, {"nbar", m.nbar.to_string()}};
      Json mbar = Json::object(), dbar = Json::object(), phi = Json::object();
      for (const auto& [e, f] : m.mbar) mbar[e] = f.to_string();
      for (const auto& [e, f] : m.dbar) dbar[e] = f.to_string();
      for (const auto& [e, f] : m.phi) phi[e] = f.to_string();
      c["mbar"] = mbar;
      c["dbar"] = dbar;
      c["phi"] = phi;
      cs.push_back(std::move(c));
    }
    procs[p] = {{"failed", ps.failed}, {"checkpoints", cs}};
  }
  return {{"graph", detail::graph_json(s.graph)}, {"processors", procs}};
}

inline std::string serialize_snapshot(const Snapshot& s) { return snapshot_json(s).dump(2) + "\n"; }

inline Snapshot load_snapshot(const std::string& path) { return parse_snapshot(read_file(path), path); }

}  // namespace dfr
