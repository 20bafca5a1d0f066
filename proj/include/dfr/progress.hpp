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

#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dfr {

/// Times strictly outside the up-set of `b`.
inline Frontier complement_of_up(const TimeDomain& d, const LogicalTime& b) {
  switch (d.kind()) {
    case DomainKind::Epoch:
      if (b.coords[0] == 0) return Frontier::empty(d);
      return Frontier::down_close(d, {LogicalTime::epoch(b.coords[0] - 1)});
    case DomainKind::Structured: {
      if (d.mode() == OrderMode::Lexicographic) {
        auto p = detail::lex_predecessor(b.coords);
        if (!p) return Frontier::empty(d);
        return Frontier::down_close(d, {LogicalTime{{}, *p}});
      }
      std::vector<LogicalTime> out;
      for (std::size_t j = 0; j < b.coords.size(); ++j) {
        if (b.coords[j] == 0) continue;
        LogicalTime t{{}, std::vector<std::int64_t>(b.coords.size(), kWildcard)};
        t.coords[j] = b.coords[j] - 1;
        out.push_back(std::move(t));
      }
      return Frontier::down_close(d, out);
    }
    case DomainKind::Sequence: {
      std::vector<LogicalTime> out;
      for (const auto& e : d.edges()) {
        if (e != b.edge) {
          out.push_back(LogicalTime::seq(e, kWildcard));
        } else if (b.coords[0] > 0) {
          out.push_back(LogicalTime::seq(e, b.coords[0] - 1));
        }
      }
      return Frontier::down_close(d, out);
    }
  }
  return Frontier::empty(d);
}

/// Times outside the up-set of every element of `times`.
inline Frontier complement_of_upset(const TimeDomain& d, const std::vector<LogicalTime>& times) {
  auto f = Frontier::top(d);
  for (const auto& t : times) f = f.intersect(complement_of_up(d, t));
  return f;
}

/// Minimal elements of an up-set.
class Antichain {
 public:
  /// Adds `t` unless some element is <= t; returns whether it was added.
  bool insert(const TimeDomain& d, const LogicalTime& t) {
    for (const auto& x : elems_) {
      if (leq(d, x, t)) return false;
    }
    std::erase_if(elems_, [&](const LogicalTime& x) { return leq(d, t, x); });
    elems_.push_back(t);
    return true;
  }
  bool any_leq(const TimeDomain& d, const LogicalTime& t) const {
    for (const auto& x : elems_) {
      if (leq(d, x, t)) return true;
    }
    return false;
  }
  const std::vector<LogicalTime>& elements() const noexcept { return elems_; }

 private:
  std::vector<LogicalTime> elems_;
};

/// Outstanding work at one processor.
struct Pointstamps {
  /// Times of messages queued for delivery, including external input.
  std::vector<LogicalTime> messages;
  /// Times of requested, undelivered notifications.
  std::vector<LogicalTime> notifications;
};

/// Where events may still occur, propagated through the graph.
struct Progress {
  /// Per processor: times at which a message may still arrive.
  std::map<std::string, Antichain> arrivals;
  /// Per processor: times at which any event may still be delivered.
  std::map<std::string, Antichain> work;
  std::map<std::string, std::vector<LogicalTime>> notifications;

  /// Times no future event can touch.
  Frontier completed(const GraphSpec& g, const std::string& p) const {
    return complement_of_upset(g.processor(p).domain, work.at(p).elements());
  }

  /// A notification at `t` may fire when no message can still arrive at or
  /// before t and no earlier notification is outstanding.
  bool notification_ready(const GraphSpec& g, const std::string& p, const LogicalTime& t) const {
    const auto& d = g.processor(p).domain;
    if (arrivals.at(p).any_leq(d, t)) return false;
    for (const auto& s : notifications.at(p)) {
      if (s != t && leq(d, s, t)) return false;
    }
    return true;
  }
};

/// Propagates outstanding pointstamps along edges. `next_seq` gives, per
/// sequence-numbered edge, the number the next message will carry.
inline Progress compute_progress(const GraphSpec& g, const std::map<std::string, Pointstamps>& stamps,
                                 const std::map<std::string, std::int64_t>& next_seq) {
  Progress pr;
  std::deque<std::pair<std::string, LogicalTime>> work;
  for (const auto& decl : g.processors()) {
    auto& arr = pr.arrivals[decl.id];
    auto& wk = pr.work[decl.id];
    auto& notes = pr.notifications[decl.id];
    auto it = stamps.find(decl.id);
    if (it == stamps.end()) continue;
    for (const auto& t : it->second.messages) {
      arr.insert(decl.domain, t);
      if (wk.insert(decl.domain, t)) work.emplace_back(decl.id, t);
    }
    for (const auto& t : it->second.notifications) {
      notes.push_back(t);
      if (wk.insert(decl.domain, t)) work.emplace_back(decl.id, t);
    }
  }
  while (!work.empty()) {
    auto [p, t] = std::move(work.front());
    work.pop_front();
    for (const auto& e : g.out_edges(p)) {
      const auto& ed = g.edge(e);
      const auto& dd = g.processor(ed.dst).domain;
      LogicalTime next;
      if (ed.projection.history_dependent()) {
        auto s = next_seq.find(e);
        next = LogicalTime::seq(e, s == next_seq.end() ? 1 : s->second);
      } else {
        next = translate_time(ed.projection, t);
      }
      pr.arrivals[ed.dst].insert(dd, next);
      if (pr.work[ed.dst].insert(dd, next)) work.emplace_back(ed.dst, next);
    }
  }
  return pr;
}

}  // namespace dfr
