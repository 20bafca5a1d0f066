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

#include <dfr/logical_time.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dfr {

enum class ProjectionKind { Identity, SentCount, LoopIngress, LoopEgress, Feedback, EpochToSeq, SeqToEpoch };

struct ProjectionSpec {
  ProjectionKind kind = ProjectionKind::Identity;
  /// Messages per epoch for SeqToEpoch.
  std::int64_t window = 1;

  bool history_dependent() const noexcept {
    return kind == ProjectionKind::SentCount || kind == ProjectionKind::EpochToSeq;
  }

  friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

/// Per-edge data recorded by the sender at a checkpoint, needed to evaluate
/// history-dependent projections.
struct ProjectionContext {
  std::int64_t sent_count = 0;
  /// Messages sent on the edge per source epoch.
  std::map<std::int64_t, std::int64_t> epoch_counts;

  friend bool operator==(const ProjectionContext&, const ProjectionContext&) = default;
};

enum class BehaviorKind {
  Select,
  Sum,
  Buffer,
  StatelessRelay,
  EpochBarrier,
  LoopIngress,
  LoopEgressIncrement,
  KeyedStateful,
  IngressSource,
  EgressSink,
};

struct BehaviorSpec {
  BehaviorKind kind = BehaviorKind::StatelessRelay;
  /// Map function id for Select, reducer id for KeyedStateful.
  std::string function;
  /// Iteration bound for LoopEgressIncrement: messages leave the loop once
  /// their innermost counter reaches it.
  std::int64_t max_iterations = 4;

  friend bool operator==(const BehaviorSpec&, const BehaviorSpec&) = default;
};

enum class PolicyKind { Ephemeral, EagerPerEvent, LazyOnCompletion, LogAllHistory, LogSentMessages };

struct PolicySpec {
  PolicyKind kind = PolicyKind::Ephemeral;
  /// Completed-frontier advances between lazy checkpoints.
  int period = 1;
  bool log_outputs = false;

  /// Whether sent messages are retained (persisted) with checkpoints.
  bool logs_messages() const noexcept {
    return log_outputs || kind == PolicyKind::LogSentMessages || kind == PolicyKind::EagerPerEvent ||
           kind == PolicyKind::LogAllHistory;
  }

  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

enum class ExternalRole { None, Ingress, Egress };

struct ProcessorDecl {
  std::string id;
  TimeDomain domain;
  BehaviorSpec behavior;
  PolicySpec policy;
  ExternalRole role = ExternalRole::None;
  bool nondeterministic = false;
};

struct EdgeDecl {
  std::string id;
  std::string src;
  std::string dst;
  ProjectionSpec projection;
};

/// The dataflow graph. Immutable once built; lookups are by id.
class GraphSpec {
 public:
  GraphSpec() = default;
  GraphSpec(std::vector<ProcessorDecl> processors, std::vector<EdgeDecl> edges)
      : processors_(std::move(processors)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < processors_.size(); ++i) proc_index_.emplace(processors_[i].id, i);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      edge_index_.emplace(edges_[i].id, i);
      in_[edges_[i].dst].push_back(edges_[i].id);
      out_[edges_[i].src].push_back(edges_[i].id);
    }
  }

  const std::vector<ProcessorDecl>& processors() const noexcept { return processors_; }
  const std::vector<EdgeDecl>& edges() const noexcept { return edges_; }

  bool has_processor(const std::string& id) const { return proc_index_.count(id) != 0; }
  bool has_edge(const std::string& id) const { return edge_index_.count(id) != 0; }

  const ProcessorDecl& processor(const std::string& id) const {
    auto it = proc_index_.find(id);
    if (it == proc_index_.end()) throw Error("unknown processor '" + id + "'");
    return processors_[it->second];
  }

  const EdgeDecl& edge(const std::string& id) const {
    auto it = edge_index_.find(id);
    if (it == edge_index_.end()) throw Error("unknown edge '" + id + "'");
    return edges_[it->second];
  }

  const std::vector<std::string>& in_edges(const std::string& p) const { return lookup(in_, p); }
  const std::vector<std::string>& out_edges(const std::string& p) const { return lookup(out_, p); }

  const TimeDomain& src_domain(const std::string& e) const { return processor(edge(e).src).domain; }
  const TimeDomain& dst_domain(const std::string& e) const { return processor(edge(e).dst).domain; }

 private:
  static const std::vector<std::string>& lookup(const std::map<std::string, std::vector<std::string>>& m,
                                                const std::string& p) {
    static const std::vector<std::string> none;
    auto it = m.find(p);
    return it == m.end() ? none : it->second;
  }

  std::vector<ProcessorDecl> processors_;
  std::vector<EdgeDecl> edges_;
  std::map<std::string, std::size_t> proc_index_;
  std::map<std::string, std::size_t> edge_index_;
  std::map<std::string, std::vector<std::string>> in_;
  std::map<std::string, std::vector<std::string>> out_;
};

namespace detail {

/// Whether `outer` plus one loop counter gives `inner`.
inline bool adds_loop_level(const TimeDomain& outer, const TimeDomain& inner) {
  if (inner.kind() != DomainKind::Structured || inner.depth() == 0) return false;
  if (outer.kind() == DomainKind::Epoch) return true;
  return outer.kind() == DomainKind::Structured && outer.depth() + 1 == inner.depth() && outer.mode() == inner.mode();
}

/// Largest time strictly below `t` in lexicographic order over
/// non-negative coordinates, using wildcards for unbounded suffixes.
inline std::optional<std::vector<std::int64_t>> lex_predecessor(std::vector<std::int64_t> t) {
  if (t.empty()) return std::nullopt;
  if (t.back() == kWildcard) return t;
  if (t.back() > 0) {
    --t.back();
    return t;
  }
  t.pop_back();
  auto prefix = lex_predecessor(std::move(t));
  if (!prefix) return std::nullopt;
  prefix->push_back(kWildcard);
  return prefix;
}

}  // namespace detail

inline std::string to_string(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::Identity: return "identity";
    case ProjectionKind::SentCount: return "sent_count";
    case ProjectionKind::LoopIngress: return "loop_ingress";
    case ProjectionKind::LoopEgress: return "loop_egress";
    case ProjectionKind::Feedback: return "feedback";
    case ProjectionKind::EpochToSeq: return "epoch_to_seq";
    case ProjectionKind::SeqToEpoch: return "seq_to_epoch";
  }
  return {};
}

/// Every rule violation in `g`; empty means the graph is well-formed.
inline std::vector<std::string> validate_graph(const GraphSpec& g) {
  std::vector<std::string> v;
  std::set<std::string> seen;
  for (const auto& p : g.processors()) {
    if (!detail::valid_id(p.id)) v.push_back("invalid processor id '" + p.id + "'");
    if (!seen.insert(p.id).second) v.push_back("duplicate processor id '" + p.id + "'");
  }
  std::set<std::string> seen_edges;
  for (const auto& e : g.edges()) {
    if (!detail::valid_id(e.id)) v.push_back("invalid edge id '" + e.id + "'");
    if (!seen_edges.insert(e.id).second) v.push_back("duplicate edge id '" + e.id + "'");
    if (seen.count(e.id)) v.push_back("edge id '" + e.id + "' collides with a processor id");
  }
  for (const auto& e : g.edges()) {
    if (!g.has_processor(e.src) || !g.has_processor(e.dst)) {
      v.push_back("edge '" + e.id + "' names an undeclared processor");
      continue;
    }
    const auto& sp = g.processor(e.src);
    const auto& dp = g.processor(e.dst);
    const auto& sd = sp.domain;
    const auto& dd = dp.domain;
    bool ok = true;
    switch (e.projection.kind) {
      case ProjectionKind::Identity: ok = sd == dd; break;
      case ProjectionKind::SentCount: ok = dd.kind() == DomainKind::Sequence && dd.has_edge(e.id); break;
      case ProjectionKind::EpochToSeq:
        ok = sd.kind() == DomainKind::Epoch && dd.kind() == DomainKind::Sequence && dd.has_edge(e.id);
        break;
      case ProjectionKind::SeqToEpoch:
        ok = sd.kind() == DomainKind::Sequence && sd.edges().size() == 1 && dd.kind() == DomainKind::Epoch &&
             e.projection.window >= 1;
        break;
      case ProjectionKind::LoopIngress: ok = detail::adds_loop_level(sd, dd); break;
      case ProjectionKind::LoopEgress: ok = detail::adds_loop_level(dd, sd); break;
      case ProjectionKind::Feedback: ok = sd == dd && sd.kind() == DomainKind::Structured && sd.depth() >= 1; break;
    }
    if (!ok) {
      v.push_back("projection domain mismatch on edge '" + e.id + "' (" + to_string(e.projection.kind) + ": " +
                  sd.to_string() + " -> " + dd.to_string() + ")");
    }
    if (e.projection.history_dependent()) {
      bool ordered = sd.kind() == DomainKind::Sequence || sp.behavior.kind == BehaviorKind::EpochBarrier ||
                     sp.role == ExternalRole::Ingress;
      if (!ordered) {
        v.push_back("edge '" + e.id + "': history-dependent projection needs a sender whose checkpoints are prefixes");
      }
    }
    if (dd.kind() == DomainKind::Sequence && !dd.has_edge(e.id) && e.projection.kind != ProjectionKind::Identity) {
      v.push_back("edge '" + e.id + "' is not in the sequence domain of '" + dp.id + "'");
    }
  }
  for (const auto& p : g.processors()) {
    const bool has_in = !g.in_edges(p.id).empty();
    const bool has_out = !g.out_edges(p.id).empty();
    const auto bk = p.behavior.kind;
    if (p.role == ExternalRole::Ingress && has_in) v.push_back("ingress '" + p.id + "' has input edges");
    if (p.role == ExternalRole::Egress && has_out) v.push_back("egress '" + p.id + "' has output edges");
    if ((p.role == ExternalRole::Ingress) != (bk == BehaviorKind::IngressSource)) {
      v.push_back("processor '" + p.id + "': IngressSource behavior and ingress role must go together");
    }
    if ((p.role == ExternalRole::Egress) != (bk == BehaviorKind::EgressSink)) {
      v.push_back("processor '" + p.id + "': EgressSink behavior and egress role must go together");
    }
    if (bk == BehaviorKind::EpochBarrier && p.domain.kind() != DomainKind::Epoch) {
      v.push_back("processor '" + p.id + "': EpochBarrier needs an epoch domain");
    }
    if (bk == BehaviorKind::LoopEgressIncrement &&
        (p.domain.kind() != DomainKind::Structured || p.domain.depth() == 0)) {
      v.push_back("processor '" + p.id + "': LoopEgressIncrement needs a structured domain with a loop counter");
    }
    if (bk == BehaviorKind::Select &&
        !(p.behavior.function == "identity" || p.behavior.function == "double" || p.behavior.function == "inc" ||
          p.behavior.function == "square")) {
      v.push_back("processor '" + p.id + "': unknown select function '" + p.behavior.function + "'");
    }
    if (bk == BehaviorKind::KeyedStateful &&
        !(p.behavior.function == "sum" || p.behavior.function == "count" || p.behavior.function == "max")) {
      v.push_back("processor '" + p.id + "': unknown reducer '" + p.behavior.function + "'");
    }
    if (p.policy.kind == PolicyKind::LogAllHistory && p.nondeterministic) {
      v.push_back("processor '" + p.id + "': history replay requires a deterministic behavior");
    }
    if (p.policy.period < 1) v.push_back("processor '" + p.id + "': checkpoint period must be >= 1");
    if (p.domain.kind() == DomainKind::Sequence && p.role != ExternalRole::Ingress) {
      for (const auto& e : p.domain.edges()) {
        const auto& ins = g.in_edges(p.id);
        if (std::find(ins.begin(), ins.end(), e) == ins.end()) {
          v.push_back("sequence domain of '" + p.id + "' names '" + e + "', which is not one of its input edges");
        }
      }
    }
  }
  return v;
}

/// Image of frontier `f` (in the source domain) under the projection of
/// edge `edge_id` whose endpoints have domains `src` and `dst`.
inline Frontier apply_projection(const ProjectionSpec& spec, const std::string& edge_id, const TimeDomain& src,
                                 const TimeDomain& dst, const Frontier& f, const ProjectionContext* ctx = nullptr) {
  if (!(f.domain() == src)) throw Error("projection input is not in the source domain of edge '" + edge_id + "'");
  switch (spec.kind) {
    case ProjectionKind::Identity:
      return f;
    case ProjectionKind::LoopIngress: {
      if (f.is_top()) return Frontier::top(dst);
      std::vector<LogicalTime> out;
      for (auto t : f.elements()) {
        t.coords.push_back(kWildcard);
        out.push_back(std::move(t));
      }
      return Frontier::down_close(dst, out);
    }
    case ProjectionKind::LoopEgress: {
      if (f.is_top()) return Frontier::top(dst);
      std::vector<LogicalTime> out;
      const bool lex = src.mode() == OrderMode::Lexicographic;
      for (const auto& t : f.elements()) {
        std::vector<std::int64_t> outer(t.coords.begin(), t.coords.end() - 1);
        if (t.coords.back() == kWildcard) {
          out.push_back(LogicalTime{{}, outer});
        } else if (lex) {
          // Outer times strictly below are complete; `outer` itself is not.
          if (auto p = detail::lex_predecessor(outer)) out.push_back(LogicalTime{{}, *p});
        }
      }
      return Frontier::down_close(dst, out);
    }
    case ProjectionKind::Feedback: {
      if (f.is_top()) return f;
      std::vector<LogicalTime> out;
      for (auto t : f.elements()) {
        if (t.coords.back() != kWildcard) ++t.coords.back();
        out.push_back(std::move(t));
      }
      return Frontier::down_close(dst, out);
    }
    case ProjectionKind::SentCount:
      if (!ctx) throw Error("projection requires recorded metadata (edge '" + edge_id + "')");
      return Frontier::down_close(dst, {LogicalTime::seq(edge_id, ctx->sent_count)});
    case ProjectionKind::EpochToSeq: {
      if (!ctx) throw Error("projection requires recorded metadata (edge '" + edge_id + "')");
      std::int64_t total = 0;
      for (const auto& [epoch, n] : ctx->epoch_counts) {
        if (f.contains(LogicalTime::epoch(epoch))) total += n;
      }
      return Frontier::down_close(dst, {LogicalTime::seq(edge_id, total)});
    }
    case ProjectionKind::SeqToEpoch: {
      if (f.is_top()) return Frontier::top(dst);
      std::int64_t fixed = 0;
      for (const auto& t : f.elements()) fixed = std::max(fixed, t.coords[0]);
      if (fixed == kWildcard) return Frontier::top(dst);
      std::int64_t complete_epochs = fixed / spec.window;
      if (complete_epochs == 0) return Frontier::empty(dst);
      return Frontier::down_close(dst, {LogicalTime::epoch(complete_epochs - 1)});
    }
  }
  return Frontier::empty(dst);
}

inline Frontier apply_projection(const GraphSpec& g, const std::string& edge_id, const Frontier& f,
                                 const ProjectionContext* ctx = nullptr) {
  const auto& e = g.edge(edge_id);
  return apply_projection(e.projection, edge_id, g.processor(e.src).domain, g.processor(e.dst).domain, f, ctx);
}

/// Time at the receiver of a message sent on a statically-projected edge
/// by an event at sender time `t`. Sequence-numbered edges are assigned by
/// the sender's counter instead.
inline LogicalTime translate_time(const ProjectionSpec& spec, const LogicalTime& t) {
  LogicalTime out = t;
  switch (spec.kind) {
    case ProjectionKind::Identity: break;
    case ProjectionKind::LoopIngress: out.coords.push_back(0); break;
    case ProjectionKind::LoopEgress: out.coords.pop_back(); break;
    case ProjectionKind::Feedback: ++out.coords.back(); break;
    case ProjectionKind::SeqToEpoch: out = LogicalTime::epoch((t.coords[0] - 1) / spec.window); break;
    case ProjectionKind::SentCount:
    case ProjectionKind::EpochToSeq:
      throw Error("sequence-numbered edges are translated by the sender");
  }
  return out;
}

}  // namespace dfr
