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

#include <dfr/graph.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace dfr {

/// Name of the virtual input edge feeding an ingress processor.
inline const std::string kInputEdge = "input";

struct Message {
  std::string edge;
  /// Time in the receiver's domain.
  LogicalTime time;
  std::int64_t payload = 0;
  /// Time of the sender's event that produced this message.
  LogicalTime origin;

  friend bool operator==(const Message&, const Message&) = default;
};

struct Event {
  enum class Kind { Message, Notification };

  Kind kind = Kind::Message;
  LogicalTime time;
  std::int64_t payload = 0;
  std::string edge;

  static Event message(std::string edge, LogicalTime t, std::int64_t payload) {
    return Event{Kind::Message, std::move(t), payload, std::move(edge)};
  }
  static Event notification(LogicalTime t) { return Event{Kind::Notification, std::move(t), 0, {}}; }

  bool is_notification() const noexcept { return kind == Kind::Notification; }

  friend bool operator==(const Event&, const Event&) = default;
};

using History = std::vector<Event>;

inline std::string to_string(const TimeDomain& d, const Event& ev) {
  if (ev.is_notification()) return "notify " + to_string(d, ev.time);
  return "msg " + ev.edge + " " + to_string(d, ev.time) + " " + std::to_string(ev.payload);
}

/// Record released by an egress processor to the external sink.
struct ExternalOutput {
  LogicalTime time;
  std::int64_t payload = 0;
  /// Occurrences of the same payload earlier at the same time; together with
  /// the time and payload it forms the dedup key for retried outputs.
  std::int64_t occurrence = 0;

  friend bool operator==(const ExternalOutput&, const ExternalOutput&) = default;
};

struct DeliveryResult {
  std::vector<Message> sends;
  std::vector<ExternalOutput> outputs;
};

/// Message `i` (0-based) of a FIFO edge queue may be delivered iff no earlier
/// message has a time <= its time.
inline bool can_dequeue(const TimeDomain& d, const std::vector<LogicalTime>& queue, std::size_t i) {
  if (i >= queue.size()) throw Error("queue index out of range");
  for (std::size_t j = 0; j < i; ++j) {
    if (leq(d, queue[j], queue[i])) return false;
  }
  return true;
}

/// H@f: the events of `h` whose times lie in `f`, in their original order.
inline History filter_history(const History& h, const Frontier& f) {
  History out;
  for (const auto& ev : h) {
    if (f.contains(ev.time)) out.push_back(ev);
  }
  return out;
}

struct BehaviorTraits {
  /// Keeps no state between logical times.
  bool stateless = true;
  bool sends_at_event_time = true;
  bool requests_notifications = false;
};

inline BehaviorTraits traits(const BehaviorSpec& b) {
  switch (b.kind) {
    case BehaviorKind::Buffer:
    case BehaviorKind::KeyedStateful:
      return {false, true, b.kind == BehaviorKind::KeyedStateful};
    case BehaviorKind::Sum:
    case BehaviorKind::EpochBarrier:
    case BehaviorKind::EgressSink:
      return {true, true, true};
    default:
      return {};
  }
}

/// Behavior state: values partitioned by logical time plus the set of times
/// already notified. Every built-in behavior fits this shape, which makes
/// selective filtering and canonical encoding uniform.
struct ProcessorState {
  std::map<LogicalTime, std::vector<std::int64_t>> slots;
  std::set<LogicalTime> done;

  bool empty() const noexcept { return slots.empty() && done.empty(); }

  ProcessorState filter(const Frontier& f) const {
    ProcessorState out;
    for (const auto& [t, v] : slots) {
      if (f.contains(t)) out.slots.emplace(t, v);
    }
    for (const auto& t : done) {
      if (f.contains(t)) out.done.insert(t);
    }
    return out;
  }

  /// Canonical byte encoding; equal states encode identically.
  std::string encode(const TimeDomain& d) const {
    std::string s;
    for (const auto& [t, v] : slots) {
      s += to_string(d, t) + "=";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      s += ";";
    }
    if (!done.empty()) {
      s += "|";
      for (const auto& t : done) s += to_string(d, t) + ";";
    }
    return s;
  }

  static ProcessorState decode(const TimeDomain& d, const std::string& text) {
    ProcessorState st;
    auto bar = text.find('|');
    for (const auto& item : detail::split(text.substr(0, bar), ';')) {
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string::npos) throw Error("malformed state entry '" + item + "'");
      std::vector<std::int64_t> v;
      for (const auto& x : detail::split(item.substr(eq + 1), ',')) {
        if (!x.empty()) v.push_back(detail::parse_int(x, "state value"));
      }
      st.slots.emplace(parse_time(d, item.substr(0, eq)), std::move(v));
    }
    if (bar != std::string::npos) {
      for (const auto& item : detail::split(text.substr(bar + 1), ';')) {
        if (!item.empty()) st.done.insert(parse_time(d, item));
      }
    }
    return st;
  }

  friend bool operator==(const ProcessorState&, const ProcessorState&) = default;
};

namespace detail {

inline std::int64_t apply_select(const std::string& fn, std::int64_t x) {
  if (fn == "double") return 2 * x;
  if (fn == "inc") return x + 1;
  if (fn == "square") return x * x;
  return x;
}

inline constexpr std::int64_t kKeys = 4;

inline std::int64_t key_of(std::int64_t payload) { return ((payload % kKeys) + kKeys) % kKeys; }

inline void insert_sorted(std::vector<std::int64_t>& v, std::int64_t x) {
  v.insert(std::upper_bound(v.begin(), v.end(), x), x);
}

}  // namespace detail

/// One processor's behavior, history and send bookkeeping. Value type.
class Processor {
 public:
  Processor(const GraphSpec& g, const std::string& id) : decl_(g.processor(id)) {
    for (const auto& e : g.out_edges(id)) outputs_.push_back(Output{g.edge(e), g.dst_domain(e)});
  }

  const std::string& id() const noexcept { return decl_.id; }
  const ProcessorDecl& decl() const noexcept { return decl_; }
  const TimeDomain& domain() const noexcept { return decl_.domain; }
  const History& history() const noexcept { return history_; }
  const ProcessorState& state() const noexcept { return state_; }
  /// Every message sent by an event in the current history, in send order.
  const std::vector<Message>& sent() const noexcept { return sent_; }

  std::string encode_state() const { return state_.encode(decl_.domain); }

  DeliveryResult deliver(const Event& ev, std::mt19937_64* rng = nullptr) {
    if (failed_) throw Error("delivery to failed processor '" + id() + "'");
    check_time(decl_.domain, ev.time);
    if (ev.time.has_wildcard()) throw Error("event time must be concrete at '" + id() + "'");
    DeliveryResult r;
    std::vector<std::pair<std::size_t, std::int64_t>> out;  // (output index, payload)
    auto to_all = [&](std::int64_t x) {
      for (std::size_t i = 0; i < outputs_.size(); ++i) out.emplace_back(i, x);
    };
    const auto& b = decl_.behavior;
    const auto& t = ev.time;
    if (!ev.is_notification()) {
      std::int64_t x = ev.payload;
      if (decl_.nondeterministic && rng) x += static_cast<std::int64_t>((*rng)() % 3);
      switch (b.kind) {
        case BehaviorKind::Select: to_all(detail::apply_select(b.function, x)); break;
        case BehaviorKind::StatelessRelay:
        case BehaviorKind::LoopIngress:
        case BehaviorKind::IngressSource: to_all(x); break;
        case BehaviorKind::Sum: {
          auto& v = state_.slots[t];
          if (v.empty()) v.push_back(0);
          v[0] += x;
          break;
        }
        case BehaviorKind::Buffer:
          detail::insert_sorted(state_.slots[t], x);
          to_all(x);
          break;
        case BehaviorKind::EpochBarrier: detail::insert_sorted(state_.slots[t], x); break;
        case BehaviorKind::LoopEgressIncrement: {
          const bool leave = t.coords.back() >= b.max_iterations;
          for (std::size_t i = 0; i < outputs_.size(); ++i) {
            if ((outputs_[i].edge.projection.kind == ProjectionKind::LoopEgress) == leave) out.emplace_back(i, x);
          }
          break;
        }
        case BehaviorKind::KeyedStateful: {
          auto& v = state_.slots[t];
          if (v.empty()) v.assign(2 * detail::kKeys, 0);
          const auto k = detail::key_of(x);
          if (b.function == "max") {
            v[k] = v[detail::kKeys + k] == 0 ? x : std::max(v[k], x);
          } else {
            v[k] += b.function == "count" ? 1 : x;
          }
          ++v[detail::kKeys + k];
          break;
        }
        case BehaviorKind::EgressSink: {
          auto& v = state_.slots[t];
          auto occ = std::count(v.begin(), v.end(), x);
          detail::insert_sorted(v, x);
          r.outputs.push_back(ExternalOutput{t, x, static_cast<std::int64_t>(occ)});
          break;
        }
      }
    } else {
      switch (b.kind) {
        case BehaviorKind::Sum:
        case BehaviorKind::EpochBarrier: {
          auto it = state_.slots.find(t);
          if (it != state_.slots.end()) {
            for (auto x : it->second) to_all(x);
            state_.slots.erase(it);
          }
          break;
        }
        case BehaviorKind::EgressSink: state_.slots.erase(t); break;
        case BehaviorKind::KeyedStateful: {
          auto at = state_.slots.find(t);
          if (at == state_.slots.end()) break;
          const auto& here = at->second;
          for (std::int64_t k = 0; k < detail::kKeys; ++k) {
            if (here[detail::kKeys + k] == 0) continue;
            std::int64_t acc = 0;
            bool any = false;
            for (const auto& [s, v] : state_.slots) {
              if (v[detail::kKeys + k] == 0 || !leq(decl_.domain, s, t)) continue;
              if (b.function == "max") {
                acc = any ? std::max(acc, v[k]) : v[k];
              } else {
                acc += v[k];
              }
              any = true;
            }
            to_all(acc * detail::kKeys + k);
          }
          state_.done.insert(t);
          break;
        }
        default: break;
      }
    }
    for (const auto& [i, x] : out) {
      auto m = make_message(i, t, x);
      sent_.push_back(m);
      r.sends.push_back(std::move(m));
    }
    history_.push_back(ev);
    return r;
  }

  /// Times at which this processor wants a notification, in time order.
  std::vector<LogicalTime> pending_notifications() const {
    std::vector<LogicalTime> out;
    if (!traits(decl_.behavior).requests_notifications) return out;
    for (const auto& [t, v] : state_.slots) {
      if (!state_.done.count(t)) out.push_back(t);
    }
    return out;
  }

  /// State that processing exactly H@f would have produced. Valid when every
  /// time in f is complete and notified.
  ProcessorState selective_state(const Frontier& f) const { return state_.filter(f); }

  std::vector<Message> sent_within(const Frontier& f) const {
    std::vector<Message> out;
    for (const auto& m : sent_) {
      if (f.contains(m.origin)) out.push_back(m);
    }
    return out;
  }

  /// Recorded data for history-dependent projections at frontier `f`.
  ProjectionContext context(const std::string& edge, const Frontier& f) const {
    ProjectionContext ctx;
    for (const auto& m : sent_) {
      if (m.edge != edge || !f.contains(m.origin)) continue;
      ++ctx.sent_count;
      if (decl_.domain.kind() == DomainKind::Epoch) ++ctx.epoch_counts[m.origin.coords[0]];
    }
    return ctx;
  }

  std::map<std::string, ProjectionContext> contexts(const Frontier& f) const {
    std::map<std::string, ProjectionContext> out;
    for (const auto& o : outputs_) out.emplace(o.edge.id, context(o.edge.id, f));
    return out;
  }

  std::int64_t sent_count(const std::string& edge) const {
    return static_cast<std::int64_t>(
        std::count_if(sent_.begin(), sent_.end(), [&](const Message& m) { return m.edge == edge; }));
  }

  /// Replace all mutable data, as after a rollback.
  void restore(ProcessorState s, History h, std::vector<Message> sent) {
    state_ = std::move(s);
    history_ = std::move(h);
    sent_ = std::move(sent);
  }

  void reset() { restore({}, {}, {}); }

  /// Loses all in-memory data; deliveries fail until `recover`.
  void fail() {
    reset();
    failed_ = true;
  }
  void recover() noexcept { failed_ = false; }
  bool failed() const noexcept { return failed_; }

 private:
  struct Output {
    EdgeDecl edge;
    TimeDomain dst;
  };

  Message make_message(std::size_t i, const LogicalTime& origin, std::int64_t payload) const {
    const auto& o = outputs_[i];
    LogicalTime t;
    if (o.edge.projection.history_dependent()) {
      t = LogicalTime::seq(o.edge.id, sent_count(o.edge.id) + 1);
    } else {
      t = translate_time(o.edge.projection, origin);
    }
    return Message{o.edge.id, std::move(t), payload, origin};
  }

  ProcessorDecl decl_;
  std::vector<Output> outputs_;
  ProcessorState state_;
  History history_;
  std::vector<Message> sent_;
  bool failed_ = false;
};

struct ReplayResult {
  ProcessorState state;
  std::string encoded;
  std::map<std::string, std::vector<Message>> sends;
};

/// Re-executes `h` on a fresh copy of processor `id`.
inline ReplayResult replay_filtered(const GraphSpec& g, const std::string& id, const History& h) {
  if (g.processor(id).nondeterministic) throw Error("cannot replay nondeterministic processor '" + id + "'");
  Processor p(g, id);
  ReplayResult r;
  for (const auto& ev : h) {
    for (auto& m : p.deliver(ev).sends) r.sends[m.edge].push_back(std::move(m));
  }
  r.state = p.state();
  r.encoded = p.encode_state();
  return r;
}

}  // namespace dfr
