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

#include <dfr/checkpoint.hpp>

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dfr {

/// Rollback-relevant view of one processor: its frontier chain with metadata.
struct ProcessorSnapshot {
  /// F*(p) in chain order, starting at EMPTY.
  std::vector<CheckpointMetadata> checkpoints;
  bool failed = false;
};

struct Snapshot {
  GraphSpec graph;
  std::map<std::string, ProcessorSnapshot> processors;

  const ProcessorSnapshot& at(const std::string& p) const {
    auto it = processors.find(p);
    if (it == processors.end()) throw Error("snapshot has no processor '" + p + "'");
    return it->second;
  }

  /// Metadata of the F*(p) entry equal to `f`.
  const CheckpointMetadata& meta(const std::string& p, const Frontier& f) const {
    for (const auto& m : at(p).checkpoints) {
      if (m.f == f) return m;
    }
    throw Error("frontier " + f.to_string() + " is not in F*(" + p + ")");
  }

  /// φ(e)(f) for an arbitrary frontier of src(e). History-dependent
  /// projections are only defined at recorded frontiers, so the largest
  /// recorded frontier inside `f` stands in for it.
  Frontier project(const std::string& e, const Frontier& f) const {
    const auto& edge = graph.edge(e);
    if (!edge.projection.history_dependent()) return apply_projection(graph, e, f);
    const CheckpointMetadata* best = nullptr;
    for (const auto& m : at(edge.src).checkpoints) {
      if (m.f.subset_of(f)) best = &m;
    }
    if (!best) return Frontier::empty(graph.dst_domain(e));
    return best->phi.at(e);
  }
};

struct Assignment {
  std::map<std::string, Frontier> f;
  std::map<std::string, Frontier> fn;

  friend bool operator==(const Assignment&, const Assignment&) = default;

  std::string to_string() const {
    std::string s;
    for (const auto& [p, fr] : f) s += p + " f=" + fr.to_string() + " fn=" + fn.at(p).to_string() + "\n";
    return s;
  }

  /// Pointwise containment of both frontiers.
  bool below(const Assignment& o) const {
    for (const auto& [p, fr] : f) {
      if (!fr.subset_of(o.f.at(p)) || !fn.at(p).subset_of(o.fn.at(p))) return false;
    }
    return true;
  }
};

/// One violated constraint with the frontiers that witness it: `lhs` is not
/// contained in `rhs`.
struct Violation {
  std::string constraint;
  std::string processor;
  std::string edge;
  Frontier lhs;
  Frontier rhs;

  std::string to_string() const {
    return constraint + " at " + processor + (edge.empty() ? "" : " on " + edge) + ": " + lhs.to_string() +
           " not within " + rhs.to_string();
  }
};

inline std::vector<Violation> check_consistent(const Snapshot& s, const Assignment& a) {
  std::vector<Violation> out;
  const auto& g = s.graph;
  auto need = [&](bool ok, const char* c, const std::string& p, const std::string& e, const Frontier& l,
                  const Frontier& r) {
    if (!ok) out.push_back(Violation{c, p, e, l, r});
  };
  for (const auto& decl : g.processors()) {
    const auto& p = decl.id;
    const auto& f = a.f.at(p);
    const auto& fn = a.fn.at(p);
    const auto& m = s.meta(p, f);
    for (const auto& e : g.out_edges(p)) {
      const auto& dst_f = a.f.at(g.edge(e).dst);
      need(m.dbar.at(e).subset_of(dst_f), "C2", p, e, m.dbar.at(e), dst_f);
    }
    for (const auto& d : g.in_edges(p)) {
      const auto& src = g.edge(d).src;
      auto fixed = s.meta(src, a.f.at(src)).phi.at(d);
      need(m.mbar.at(d).subset_of(fixed), "C3", p, d, m.mbar.at(d), fixed);
    }
    need(fn.subset_of(f), "C4a", p, "", fn, f);
    need(m.nbar.subset_of(fn), "C4b", p, "", m.nbar, fn);
    for (const auto& d : g.in_edges(p)) {
      auto fixed = s.project(d, a.fn.at(g.edge(d).src));
      need(fn.subset_of(fixed), "C4c", p, d, fn, fixed);
    }
  }
  return out;
}

struct ChooseResult {
  Assignment assignment;
  /// Processor evaluations that lowered f or f_n.
  int iterations = 0;
  std::vector<std::string> trace;
};

namespace detail {

/// Intersection of φ(d)(f_n(src(d))) over the inputs of `p`.
inline Frontier notified_bound(const Snapshot& s, const Assignment& a, const std::string& p) {
  const auto& g = s.graph;
  auto bound = Frontier::top(g.processor(p).domain);
  for (const auto& d : g.in_edges(p)) bound = bound.intersect(s.project(d, a.fn.at(g.edge(d).src)));
  return bound;
}

}  // namespace detail

/// Greatest consistent assignment by monotone descent from max F*(p).
inline ChooseResult choose_frontiers(const Snapshot& s) {
  const auto& g = s.graph;
  ChooseResult r;
  auto& a = r.assignment;
  for (const auto& decl : g.processors()) {
    const auto& chain = s.at(decl.id).checkpoints;
    if (chain.empty() || !chain.front().f.is_empty()) throw Error("F*(" + decl.id + ") must start at EMPTY");
    a.f[decl.id] = chain.back().f;
    a.fn[decl.id] = chain.back().f;
  }
  std::deque<std::string> work;
  std::set<std::string> queued;
  auto push = [&](const std::string& p) {
    if (queued.insert(p).second) work.push_back(p);
  };
  for (const auto& decl : g.processors()) push(decl.id);
  while (!work.empty()) {
    auto p = work.front();
    work.pop_front();
    queued.erase(p);
    const auto bound = detail::notified_bound(s, a, p).intersect(a.fn.at(p));
    const auto& chain = s.at(p).checkpoints;
    const CheckpointMetadata* pick = nullptr;
    for (auto it = chain.rbegin(); it != chain.rend() && !pick; ++it) {
      const auto& m = *it;
      if (!m.f.subset_of(a.f.at(p))) continue;
      bool ok = m.nbar.subset_of(bound);
      for (const auto& e : g.out_edges(p)) ok = ok && m.dbar.at(e).subset_of(a.f.at(g.edge(e).dst));
      for (const auto& d : g.in_edges(p)) {
        const auto& src = g.edge(d).src;
        ok = ok && m.mbar.at(d).subset_of(s.meta(src, a.f.at(src)).phi.at(d));
      }
      if (ok) pick = &m;
    }
    if (!pick) throw Error("no admissible frontier for '" + p + "'");
    auto fn = pick->f.intersect(bound);
    if (pick->f == a.f.at(p) && fn == a.fn.at(p)) continue;
    a.f[p] = pick->f;
    a.fn[p] = fn;
    ++r.iterations;
    r.trace.push_back("iter " + std::to_string(r.iterations) + " " + p + " f=" + pick->f.to_string() +
                      " fn=" + fn.to_string());
    for (const auto& e : g.out_edges(p)) push(g.edge(e).dst);
    for (const auto& e : g.in_edges(p)) push(g.edge(e).src);
  }
  return r;
}

/// Exhaustive search: every f-vector drawn from the F* chains is tested;
/// for each, the largest f_n vector is computed by downward iteration from
/// f. Returns the maximal consistent assignments.
inline std::vector<Assignment> brute_force_oracle(const Snapshot& s, std::size_t limit = 1000000) {
  const auto& g = s.graph;
  std::vector<std::string> ids;
  std::size_t total = 1;
  for (const auto& decl : g.processors()) {
    ids.push_back(decl.id);
    total *= s.at(decl.id).checkpoints.size();
    if (total > limit) throw Error("oracle bound exceeded: use a scenario with fewer checkpoints or processors");
  }
  std::vector<Assignment> ok;
  std::vector<std::size_t> idx(ids.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Assignment a;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      a.f[ids[i]] = s.at(ids[i]).checkpoints[idx[i]].f;
      a.fn[ids[i]] = a.f[ids[i]];
    }
    for (int round = 0;; ++round) {
      if (round > 10000) throw Error("notification frontier iteration did not settle");
      bool changed = false;
      for (const auto& p : ids) {
        auto next = a.fn[p];
        for (const auto& d : g.in_edges(p)) next = next.intersect(s.project(d, a.fn.at(g.edge(d).src)));
        if (!(next == a.fn[p])) {
          a.fn[p] = next;
          changed = true;
        }
      }
      if (!changed) break;
    }
    if (check_consistent(s, a).empty()) ok.push_back(a);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (++idx[i] < s.at(ids[i]).checkpoints.size()) break;
      idx[i] = 0;
    }
  }
  std::vector<Assignment> maximal;
  for (const auto& a : ok) {
    bool dominated = false;
    for (const auto& b : ok) {
      if (!(a == b) && a.below(b)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) maximal.push_back(a);
  }
  return maximal;
}

/// Per-processor result of resetting to the chosen frontier.
struct ResetPlan {
  Frontier f;
  /// F*' as frontiers.
  std::vector<Frontier> frontiers;
  History history;
  std::string state;
  /// Q'(e): logged messages to re-send, per output edge.
  std::map<std::string, std::vector<Message>> resend;
};

/// Reset of `p` given the chosen assignment. `store` holds p's records; for
/// a live processor it includes the record at TOP.
inline ResetPlan reset_state(const GraphSpec& g, const std::string& p, const Assignment& a,
                             const CheckpointStore& store) {
  ResetPlan plan;
  plan.f = a.f.at(p);
  const auto* rec = [&]() -> const CheckpointRecord* {
    for (const auto& r : store.records()) {
      if (r.meta.f == plan.f) return &r;
    }
    return nullptr;
  }();
  if (!rec || !rec->persisted) throw Error("missing persisted record for '" + p + "' at " + plan.f.to_string());
  for (const auto& f : store.frontiers()) {
    if (f.subset_of(plan.f)) plan.frontiers.push_back(f);
  }
  plan.history = rec->history;
  plan.state = record_state(g, *rec);
  for (const auto& e : g.out_edges(p)) {
    auto& q = plan.resend[e];
    const auto& dst_f = a.f.at(g.edge(e).dst);
    auto it = rec->logs.find(e);
    if (it == rec->logs.end()) continue;
    for (const auto& m : it->second) {
      if (!dst_f.contains(m.time)) q.push_back(m);
    }
  }
  return plan;
}

}  // namespace dfr
