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

#include <dfr/behavior.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dfr {

/// Frontier estimates recorded with a checkpoint at frontier `f`.
struct CheckpointMetadata {
  std::string processor;
  Frontier f;
  /// Notifications delivered within f.
  Frontier nbar;
  /// Per input edge: messages delivered within f.
  std::map<std::string, Frontier> mbar;
  /// Per output edge, in the receiver's domain: messages sent within f and
  /// not logged.
  std::map<std::string, Frontier> dbar;
  /// Per output edge: projection of f.
  std::map<std::string, Frontier> phi;

  /// Invariant violations; empty when well-formed.
  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    const std::string at = processor + " at " + f.to_string();
    if (!nbar.subset_of(f)) v.push_back(at + ": notification estimate exceeds frontier");
    for (const auto& [e, m] : mbar) {
      if (!m.subset_of(f)) v.push_back(at + ": message estimate on " + e + " exceeds frontier");
    }
    for (const auto& [e, d] : dbar) {
      auto it = phi.find(e);
      if (it == phi.end()) {
        v.push_back(at + ": no projection recorded for " + e);
      } else if (!d.subset_of(it->second)) {
        v.push_back(at + ": discarded messages on " + e + " are not fixed by the projection");
      }
    }
    return v;
  }

  friend bool operator==(const CheckpointMetadata&, const CheckpointMetadata&) = default;
};

struct CheckpointRecord {
  CheckpointMetadata meta;
  /// Canonical encoding of S(p,f); empty when reconstructed by replay.
  std::string state;
  bool replay_state = false;
  /// L(e,f) per output edge, in send order.
  std::map<std::string, std::vector<Message>> logs;
  std::map<std::string, ProjectionContext> contexts;
  bool acked = false;
  bool persisted = false;
  /// Data was garbage collected; only the metadata survives.
  bool collected = false;
  /// H@f and the sends it caused. Simulation bookkeeping so a restored
  /// processor keeps an exact history; not part of the persisted contract.
  History history;
  std::vector<Message> sent;
};

namespace detail {

inline std::map<std::string, Frontier> project_all(const GraphSpec& g, const std::string& p, const Frontier& f,
                                                   const std::map<std::string, ProjectionContext>& ctx) {
  std::map<std::string, Frontier> out;
  for (const auto& e : g.out_edges(p)) {
    auto it = ctx.find(e);
    out.emplace(e, apply_projection(g, e, f, it == ctx.end() ? nullptr : &it->second));
  }
  return out;
}

}  // namespace detail

/// The always-available initial-state record.
inline CheckpointRecord empty_record(const GraphSpec& g, const std::string& p) {
  const auto& d = g.processor(p).domain;
  CheckpointRecord r;
  r.meta.processor = p;
  r.meta.f = Frontier::empty(d);
  r.meta.nbar = Frontier::empty(d);
  for (const auto& e : g.in_edges(p)) r.meta.mbar.emplace(e, Frontier::empty(d));
  for (const auto& e : g.out_edges(p)) {
    r.contexts.emplace(e, ProjectionContext{});
    r.meta.dbar.emplace(e, Frontier::empty(g.dst_domain(e)));
  }
  r.meta.phi = detail::project_all(g, p, r.meta.f, r.contexts);
  r.acked = r.persisted = true;
  return r;
}

/// Conservative estimates M̄=N̄=f and D̄=φ(f), or D̄=EMPTY when every sent
/// message is logged.
inline CheckpointMetadata default_metadata(const GraphSpec& g, const std::string& p, const Frontier& f,
                                           const std::map<std::string, ProjectionContext>& ctx, bool logs_all,
                                           std::optional<BehaviorTraits> declared = std::nullopt) {
  const auto bt = declared.value_or(traits(g.processor(p).behavior));
  if (!bt.sends_at_event_time && !logs_all) {
    throw Error("processor '" + p + "' sends into the future and must track discarded times explicitly");
  }
  CheckpointMetadata m;
  m.processor = p;
  m.f = f;
  m.nbar = f;
  for (const auto& e : g.in_edges(p)) m.mbar.emplace(e, f);
  m.phi = detail::project_all(g, p, f, ctx);
  for (const auto& [e, img] : m.phi) m.dbar.emplace(e, logs_all ? Frontier::empty(img.domain()) : img);
  return m;
}

/// Estimates computed from the processor's history restricted to `f`.
inline CheckpointMetadata exact_metadata(const GraphSpec& g, const Processor& proc, const Frontier& f,
                                         bool logs_all) {
  const auto& p = proc.id();
  const auto& d = proc.domain();
  CheckpointMetadata m;
  m.processor = p;
  m.f = f;
  std::vector<LogicalTime> notes;
  std::map<std::string, std::vector<LogicalTime>> msgs;
  for (const auto& ev : proc.history()) {
    if (!f.contains(ev.time)) continue;
    if (ev.is_notification()) {
      notes.push_back(ev.time);
    } else {
      msgs[ev.edge].push_back(ev.time);
    }
  }
  m.nbar = Frontier::down_close(d, notes);
  for (const auto& e : g.in_edges(p)) m.mbar.emplace(e, Frontier::down_close(d, msgs[e]));
  m.phi = detail::project_all(g, p, f, proc.contexts(f));
  std::map<std::string, std::vector<LogicalTime>> sent;
  if (!logs_all) {
    for (const auto& msg : proc.sent_within(f)) sent[msg.edge].push_back(msg.time);
  }
  for (const auto& e : g.out_edges(p)) m.dbar.emplace(e, Frontier::down_close(g.dst_domain(e), sent[e]));
  return m;
}

/// Record for the live processor at TOP, used during recovery.
inline CheckpointRecord live_record(const GraphSpec& g, const Processor& proc) {
  const auto top = Frontier::top(proc.domain());
  CheckpointRecord r;
  r.meta = exact_metadata(g, proc, top, proc.decl().policy.logs_messages());
  r.state = proc.encode_state();
  r.contexts = proc.contexts(top);
  r.acked = r.persisted = true;
  r.history = proc.history();
  r.sent = proc.sent();
  if (proc.decl().policy.logs_messages()) {
    for (const auto& m : r.sent) r.logs[m.edge].push_back(m);
  }
  return r;
}

/// Builds the record for checkpoint frontier `f` under the processor's policy.
/// `completed` is the set of times currently complete at the processor.
inline CheckpointRecord take_checkpoint(const GraphSpec& g, const Processor& proc, const Frontier& f,
                                        const Frontier& completed, const Frontier& previous) {
  const auto& p = proc.id();
  if (!f.subset_of(completed)) {
    throw Error("checkpoint of '" + p + "' at " + f.to_string() + " includes incomplete times");
  }
  if (!previous.strict_subset_of(f)) {
    throw Error("checkpoint of '" + p + "' at " + f.to_string() + " does not extend " + previous.to_string());
  }
  const auto& decl = proc.decl();
  const auto& policy = decl.policy;
  const bool logs = policy.logs_messages();
  const auto st = traits(decl.behavior);
  CheckpointRecord r;
  r.contexts = proc.contexts(f);
  r.history = filter_history(proc.history(), f);
  r.sent = proc.sent_within(f);
  if (policy.kind == PolicyKind::Ephemeral) {
    if (!st.stateless) throw Error("ephemeral stateful processor '" + p + "' keeps no checkpoints");
    r.meta = default_metadata(g, p, f, r.contexts, false);
  } else {
    r.meta = exact_metadata(g, proc, f, logs);
  }
  if (policy.kind == PolicyKind::LogAllHistory) {
    r.replay_state = true;
  } else if (!st.stateless || policy.kind != PolicyKind::Ephemeral) {
    r.state = proc.selective_state(f).encode(decl.domain);
  }
  if (logs) {
    for (const auto& m : r.sent) r.logs[m.edge].push_back(m);
  }
  if (auto v = r.meta.violations(); !v.empty()) throw Error(v.front());
  return r;
}

/// S(p,f) of a record, replaying the filtered history when needed.
inline std::string record_state(const GraphSpec& g, const CheckpointRecord& r) {
  if (r.meta.f.is_empty()) return {};
  if (r.collected) throw Error("record " + r.meta.f.to_string() + " of '" + r.meta.processor + "' was collected");
  if (!r.replay_state) return r.state;
  return replay_filtered(g, r.meta.processor, r.history).encoded;
}

/// F*(p): the chain of checkpoint records of one processor. Index 0 is the
/// initial-state record at EMPTY.
class CheckpointStore {
 public:
  CheckpointStore() = default;
  CheckpointStore(const GraphSpec& g, const std::string& p) : records_{empty_record(g, p)} {}

  const std::vector<CheckpointRecord>& records() const noexcept { return records_; }

  const CheckpointRecord& latest() const { return records_.back(); }

  const CheckpointRecord* latest_persisted() const {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->persisted) return &*it;
    }
    return nullptr;
  }

  /// Frontiers in chain order, optionally only those persisted.
  std::vector<Frontier> frontiers(bool persisted_only = true) const {
    std::vector<Frontier> out;
    for (const auto& r : records_) {
      if (!persisted_only || r.persisted) out.push_back(r.meta.f);
    }
    return out;
  }

  const CheckpointRecord& at(const Frontier& f) const {
    for (const auto& r : records_) {
      if (r.meta.f == f) return r;
    }
    throw Error("no checkpoint at " + f.to_string());
  }

  void append(CheckpointRecord r) {
    if (!records_.back().meta.f.strict_subset_of(r.meta.f)) {
      throw Error("checkpoint at " + r.meta.f.to_string() + " breaks the frontier chain");
    }
    records_.push_back(std::move(r));
  }

  /// Installs the live record at TOP, replacing a stored TOP record whose
  /// metadata may be coarser than the live processor's exact history.
  void put_live(CheckpointRecord r) {
    if (records_.back().meta.f.is_top()) records_.pop_back();
    append(std::move(r));
  }

  /// Storage acknowledged the record at `f`. Acks become visible in chain
  /// order; returns the records that became persisted.
  std::vector<const CheckpointRecord*> ack(const Frontier& f) {
    for (auto& r : records_) {
      if (r.meta.f == f) r.acked = true;
    }
    std::vector<const CheckpointRecord*> out;
    for (auto& r : records_) {
      if (!r.acked) break;
      if (!r.persisted) {
        r.persisted = true;
        out.push_back(&r);
      }
    }
    return out;
  }

  /// Loss of volatile memory: unpersisted records vanish.
  void drop_unpersisted() {
    std::erase_if(records_, [](const CheckpointRecord& r) { return !r.persisted; });
  }

  /// F*' after rollback to `f`.
  void truncate_to(const Frontier& f) {
    std::erase_if(records_, [&](const CheckpointRecord& r) { return !r.meta.f.subset_of(f); });
  }

  /// Collects records strictly below watermark `w`; returns their frontiers.
  /// The initial-state record stays usable since it needs no stored data.
  std::vector<Frontier> collect_below(const Frontier& w) {
    std::vector<Frontier> gone;
    for (auto& r : records_) {
      if (r.persisted && !r.collected && r.meta.f.strict_subset_of(w)) {
        r.collected = true;
        gone.push_back(r.meta.f);
      }
    }
    std::erase_if(records_, [](const CheckpointRecord& r) { return r.collected && !r.meta.f.is_empty(); });
    return gone;
  }

  /// Drops logged messages on `edge` whose times lie in `w`.
  std::size_t trim_logs(const std::string& edge, const Frontier& w) {
    std::size_t n = 0;
    for (auto& r : records_) {
      auto it = r.logs.find(edge);
      if (it == r.logs.end()) continue;
      n += std::erase_if(it->second, [&](const Message& m) { return w.contains(m.time); });
    }
    return n;
  }

 private:
  std::vector<CheckpointRecord> records_;
};

}  // namespace dfr
