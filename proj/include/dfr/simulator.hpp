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

#include <dfr/monitor.hpp>
#include <dfr/progress.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace dfr {

struct InputBatch {
  std::string id;
  LogicalTime time;
  std::vector<std::int64_t> payloads;

  friend bool operator==(const InputBatch&, const InputBatch&) = default;
};

struct FailureSpec {
  /// Injected before this delivery step, or at quiescence if the run ends
  /// earlier.
  std::int64_t step = 0;
  std::vector<std::string> processors;

  friend bool operator==(const FailureSpec&, const FailureSpec&) = default;
};

enum class SchedulePolicy { Fifo, RandomEligible };

struct Scenario {
  std::string name;
  GraphSpec graph;
  /// Per ingress processor, in the order the external source offers them.
  std::map<std::string, std::vector<InputBatch>> inputs;
  std::vector<FailureSpec> failures;
  std::uint64_t seed = 0;
  SchedulePolicy schedule = SchedulePolicy::Fifo;
  std::int64_t max_steps = 100000;
  /// Storage acknowledgement delay, in steps, for lazily persisted records.
  std::int64_t min_latency = 1;
  std::int64_t max_latency = 4;
};

/// Problems with a scenario beyond graph validation.
inline std::vector<std::string> validate_scenario(const Scenario& sc) {
  auto v = validate_graph(sc.graph);
  if (!v.empty()) return v;
  const auto& g = sc.graph;
  // Every sequence time is unique, so those processors never wait on one.
  for (const auto& d : g.processors()) {
    if (d.domain.kind() == DomainKind::Sequence && traits(d.behavior).requests_notifications) {
      v.push_back("processor '" + d.id + "' uses notifications, which a sequence domain does not provide");
    }
  }
  for (const auto& [p, batches] : sc.inputs) {
    if (!g.has_processor(p)) {
      v.push_back("inputs for unknown processor '" + p + "'");
      continue;
    }
    const auto& d = g.processor(p);
    if (d.role != ExternalRole::Ingress) v.push_back("inputs for non-ingress processor '" + p + "'");
    if (d.domain.kind() == DomainKind::Sequence) v.push_back("ingress '" + p + "' cannot use a sequence domain");
    std::set<std::string> ids;
    for (const auto& b : batches) {
      if (!ids.insert(b.id).second) v.push_back("duplicate batch id '" + b.id + "' at '" + p + "'");
      try {
        check_time(d.domain, b.time);
        if (b.time.has_wildcard()) v.push_back("batch '" + b.id + "' has a wildcard time");
      } catch (const Error& e) {
        v.push_back("batch '" + b.id + "': " + e.what());
      }
    }
  }
  for (const auto& f : sc.failures) {
    if (f.processors.empty()) v.push_back("failure at step " + std::to_string(f.step) + " names no processor");
    if (f.step < 0) v.push_back("failure step must be non-negative");
    for (const auto& p : f.processors) {
      if (!g.has_processor(p)) v.push_back("failure names unknown processor '" + p + "'");
    }
  }
  if (sc.max_steps < 1) v.push_back("max_steps must be positive");
  if (sc.min_latency < 0 || sc.max_latency < sc.min_latency) v.push_back("invalid storage latency range");
  return v;
}

struct RecoveryReport {
  Snapshot snapshot;
  Assignment assignment;
  int iterations = 0;
  std::vector<std::string> violations;
};

struct Trace {
  std::vector<std::string> lines;
  std::vector<RecoveryReport> recoveries;
  std::map<std::string, std::string> final_states;

  std::string text() const {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
  }
};

class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, std::string prefix) : Error(what), prefix_(std::move(prefix)) {}
  const std::string& trace_prefix() const noexcept { return prefix_; }

 private:
  std::string prefix_;
};

/// Compares the deduplicated external outputs of two traces per sink and
/// time. Returns the first divergence, or nothing when equal.
inline std::optional<std::string> compare_external(const std::vector<std::string>& a,
                                                   const std::vector<std::string>& b) {
  using Key = std::pair<std::string, std::string>;  // (sink, time)
  auto collect = [](const std::vector<std::string>& lines) {
    std::map<Key, std::multiset<std::int64_t>> out;
    std::set<std::tuple<std::string, std::string, std::int64_t, std::int64_t>> seen;
    for (const auto& l : lines) {
      std::istringstream in(l);
      std::string tag, sink, time;
      std::int64_t payload = 0, occ = 0;
      if (!(in >> tag) || tag != "output") continue;
      if (!(in >> sink >> time >> payload >> occ)) throw Error("malformed output record: " + l);
      if (seen.emplace(sink, time, payload, occ).second) out[{sink, time}].insert(payload);
    }
    return out;
  };
  const auto x = collect(a), y = collect(b);
  auto show = [](const std::multiset<std::int64_t>& s) {
    std::string r = "[";
    for (auto v : s) r += (r.size() > 1 ? " " : "") + std::to_string(v);
    return r + "]";
  };
  static const std::multiset<std::int64_t> none;
  std::set<Key> keys;
  for (const auto& [k, v] : x) keys.insert(k);
  for (const auto& [k, v] : y) keys.insert(k);
  for (const auto& k : keys) {
    const auto& l = x.count(k) ? x.at(k) : none;
    const auto& r = y.count(k) ? y.at(k) : none;
    if (l != r) return "sink " + k.first + " at " + k.second + ": " + show(l) + " vs " + show(r);
  }
  return std::nullopt;
}

inline std::optional<std::string> compare_external(const Trace& a, const Trace& b) {
  return compare_external(a.lines, b.lines);
}

/// Step bound: FALKIRK_STEP_LIMIT overrides the scenario's limit.
inline std::int64_t step_limit(const Scenario& sc) {
  if (const char* env = std::getenv("FALKIRK_STEP_LIMIT"); env && *env) {
    return detail::parse_int(env, "FALKIRK_STEP_LIMIT");
  }
  return sc.max_steps;
}

inline std::string hex_digest(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

/// Deterministic discrete-event execution of a scenario.
class Simulation {
 public:
  explicit Simulation(Scenario sc) : sc_(std::move(sc)), rng_(sc_.seed), limit_(step_limit(sc_)) {
    if (auto v = validate_scenario(sc_); !v.empty()) throw Error(v.front());
    const auto& g = sc_.graph;
    monitor_ = Monitor(g);
    for (const auto& d : g.processors()) {
      procs_.emplace(d.id, Processor(g, d.id));
      stores_.emplace(d.id, CheckpointStore(g, d.id));
      last_completed_.emplace(d.id, Frontier::empty(d.domain));
      advances_[d.id] = 0;
    }
    for (const auto& e : g.edges()) add_channel(e.id, e.src, e.dst);
    for (const auto& d : g.processors()) {
      if (d.role == ExternalRole::Ingress) add_channel(input_key(d.id), {}, d.id);
    }
    failures_ = sc_.failures;
    std::stable_sort(failures_.begin(), failures_.end(),
                     [](const FailureSpec& a, const FailureSpec& b) { return a.step < b.step; });
  }

  const Scenario& scenario() const noexcept { return sc_; }
  const Monitor& monitor() const noexcept { return monitor_; }
  const std::map<std::string, CheckpointStore>& stores() const noexcept { return stores_; }
  const Processor& processor(const std::string& p) const { return procs_.at(p); }
  std::int64_t steps() const noexcept { return step_; }

  /// Runs to quiescence and returns the trace.
  Trace run() {
    log("start " + (sc_.name.empty() ? std::string("scenario") : sc_.name) + " seed=" + std::to_string(sc_.seed));
    for (const auto& d : sc_.graph.processors()) {
      auto it = sc_.inputs.find(d.id);
      if (it == sc_.inputs.end()) continue;
      retained_[d.id] = it->second;
      for (const auto& b : it->second) offer(d.id, b);
    }
    update_checkpoints();
    while (true) {
      flush_acks(false);
      if (next_failure_ < failures_.size() && failures_[next_failure_].step <= step_) {
        inject_failure();
        continue;
      }
      auto actions = eligible();
      if (actions.empty()) {
        if (!acks_.empty()) {
          flush_acks(true);
          continue;
        }
        if (next_failure_ < failures_.size()) {
          inject_failure();
          continue;
        }
        break;
      }
      if (step_ >= limit_) {
        throw SimulationError("no quiescence within " + std::to_string(limit_) + " steps", trace_.text());
      }
      std::size_t pick = 0;
      if (sc_.schedule == SchedulePolicy::RandomEligible) {
        pick = static_cast<std::size_t>(rng_() % actions.size());
      } else {
        // Notifications first, then the oldest queued message.
        for (std::size_t i = 0; i < actions.size(); ++i) {
          if (actions[i].notify) {
            pick = i;
            break;
          }
          if (!actions[pick].notify && actions[i].order < actions[pick].order) pick = i;
        }
      }
      execute(actions[pick]);
      ++step_;
      update_checkpoints();
    }
    log("quiescent steps=" + std::to_string(step_));
    for (const auto& d : sc_.graph.processors()) {
      auto enc = procs_.at(d.id).encode_state();
      log("final " + d.id + " state=" + hex_digest(enc));
      trace_.final_states[d.id] = enc;
    }
    return trace_;
  }

 private:
  struct Queued {
    Message msg;
    std::uint64_t order = 0;
  };
  struct Channel {
    std::string key;
    std::string src;  // empty for external input
    std::string dst;
    std::deque<Queued> queue;
  };
  struct Action {
    bool notify = false;
    std::string processor;
    LogicalTime time;
    std::size_t channel = 0;
    std::size_t index = 0;
    std::uint64_t order = 0;
  };
  struct PendingAck {
    std::int64_t due = 0;
    std::string processor;
    Frontier f;
  };

  static std::string input_key(const std::string& p) { return "input@" + p; }

  void add_channel(std::string key, std::string src, std::string dst) {
    channel_index_[key] = channels_.size();
    channels_.push_back(Channel{std::move(key), std::move(src), std::move(dst), {}});
  }

  Channel& channel(const std::string& key) { return channels_.at(channel_index_.at(key)); }

  void log(std::string line) { trace_.lines.push_back(std::move(line)); }

  std::string show(const std::string& p, const LogicalTime& t) const {
    return to_string(sc_.graph.processor(p).domain, t);
  }

  void enqueue(const std::string& key, Message m) { channel(key).queue.push_back(Queued{std::move(m), next_order_++}); }

  void offer(const std::string& ingress, const InputBatch& b) {
    for (auto x : b.payloads) enqueue(input_key(ingress), Message{kInputEdge, b.time, x, b.time});
  }

  Progress progress() const {
    const auto& g = sc_.graph;
    std::map<std::string, Pointstamps> stamps;
    for (const auto& ch : channels_) {
      for (const auto& q : ch.queue) stamps[ch.dst].messages.push_back(q.msg.time);
    }
    for (const auto& [p, proc] : procs_) {
      if (!proc.failed()) stamps[p].notifications = proc.pending_notifications();
    }
    std::map<std::string, std::int64_t> next_seq;
    for (const auto& e : g.edges()) {
      if (e.projection.history_dependent()) next_seq[e.id] = procs_.at(e.src).sent_count(e.id) + 1;
    }
    return compute_progress(g, stamps, next_seq);
  }

  std::vector<Action> eligible() const {
    std::vector<Action> out;
    const auto pr = progress();
    for (const auto& d : sc_.graph.processors()) {
      for (const auto& t : procs_.at(d.id).pending_notifications()) {
        if (pr.notification_ready(sc_.graph, d.id, t)) out.push_back(Action{true, d.id, t, 0, 0, 0});
      }
    }
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      const auto& ch = channels_[c];
      if (ch.queue.empty()) continue;
      const auto& dom = sc_.graph.processor(ch.dst).domain;
      std::vector<LogicalTime> times;
      for (const auto& q : ch.queue) times.push_back(q.msg.time);
      const std::size_t n = sc_.schedule == SchedulePolicy::Fifo ? 1 : times.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (can_dequeue(dom, times, i)) out.push_back(Action{false, ch.dst, times[i], c, i, ch.queue[i].order});
      }
    }
    return out;
  }

  void execute(const Action& a) {
    auto& proc = procs_.at(a.processor);
    auto* rng = proc.decl().nondeterministic ? &rng_ : nullptr;
    DeliveryResult r;
    const auto step = "step " + std::to_string(step_) + " deliver " + a.processor + " ";
    if (a.notify) {
      log(step + "notify " + show(a.processor, a.time));
      r = proc.deliver(Event::notification(a.time), rng);
    } else {
      auto& q = channels_[a.channel].queue;
      auto m = q[a.index].msg;
      q.erase(q.begin() + static_cast<std::ptrdiff_t>(a.index));
      log(step + "msg " + m.edge + " " + show(a.processor, m.time) + " " + std::to_string(m.payload));
      r = proc.deliver(Event::message(m.edge, m.time, m.payload), rng);
    }
    for (auto& m : r.sends) {
      const auto& dst = sc_.graph.edge(m.edge).dst;
      log("send " + m.edge + " " + show(dst, m.time) + " " + std::to_string(m.payload));
      const auto key = m.edge;
      enqueue(key, std::move(m));
    }
    for (const auto& o : r.outputs) {
      log("output " + a.processor + " " + show(a.processor, o.time) + " " + std::to_string(o.payload) + " " +
          std::to_string(o.occurrence));
    }
  }

  std::int64_t latency() {
    const auto span = static_cast<std::uint64_t>(sc_.max_latency - sc_.min_latency + 1);
    return sc_.min_latency + static_cast<std::int64_t>(rng_() % span);
  }

  /// Takes the checkpoints each policy asks for at completed-frontier advances.
  void update_checkpoints() {
    const auto& g = sc_.graph;
    const auto pr = progress();
    for (const auto& d : g.processors()) {
      auto& proc = procs_.at(d.id);
      if (proc.failed()) continue;
      auto c = pr.completed(g, d.id);
      if (c == last_completed_.at(d.id)) continue;
      last_completed_.at(d.id) = c;
      ++advances_.at(d.id);
      const auto& pol = d.policy;
      if (pol.kind == PolicyKind::Ephemeral && !traits(d.behavior).stateless) continue;
      auto& store = stores_.at(d.id);
      if (!store.latest().meta.f.strict_subset_of(c)) continue;
      const bool instant = pol.kind == PolicyKind::EagerPerEvent || pol.kind == PolicyKind::LogAllHistory ||
                           pol.kind == PolicyKind::Ephemeral;
      if (!instant && advances_.at(d.id) < pol.period) continue;
      store.append(take_checkpoint(g, proc, c, c, store.latest().meta.f));
      advances_.at(d.id) = 0;
      log("checkpoint " + d.id + " " + c.to_string());
      if (instant) {
        persist(d.id, c);
      } else {
        acks_.push_back(PendingAck{step_ + latency(), d.id, c});
      }
    }
  }

  /// Delivers storage acks that are due, or all of them at quiescence.
  void flush_acks(bool all) {
    while (true) {
      auto it = acks_.end();
      for (auto a = acks_.begin(); a != acks_.end(); ++a) {
        if ((all || a->due <= step_) && (it == acks_.end() || a->due < it->due)) it = a;
      }
      if (it == acks_.end()) return;
      auto ack = *it;
      acks_.erase(it);
      persist(ack.processor, ack.f);
    }
  }

  void persist(const std::string& p, const Frontier& f) {
    std::vector<CheckpointMetadata> metas;
    for (const auto* r : stores_.at(p).ack(f)) metas.push_back(r->meta);
    for (const auto& m : metas) {
      log("persisted " + p + " " + m.f.to_string());
      for (const auto& adv : monitor_.ingest(m)) on_watermark(adv.processor, adv.watermark);
    }
  }

  void on_watermark(const std::string& p, const Frontier& w) {
    const auto& g = sc_.graph;
    log("watermark " + p + " " + w.to_string());
    auto act = monitor_.authorize_gc(p, w);
    auto gone = stores_.at(p).collect_below(w);
    const auto n = std::count_if(gone.begin(), gone.end(), [](const Frontier& f) { return !f.is_empty(); });
    if (n > 0) log("gc " + p + " " + w.to_string() + " records=" + std::to_string(n));
    for (const auto& e : act.trim_edges) {
      auto n = stores_.at(g.edge(e).src).trim_logs(e, w);
      if (n > 0) log("trim " + e + " " + w.to_string() + " messages=" + std::to_string(n));
    }
    const auto& decl = g.processor(p);
    if (decl.role == ExternalRole::Ingress) {
      auto io = monitor_.handle_io_watermark(p);
      auto& kept = retained_[p];
      for (const auto& b : kept) {
        if (io.ack_inputs.contains(b.time)) log("input-ack " + p + " " + b.id);
      }
      std::erase_if(kept, [&](const InputBatch& b) { return io.ack_inputs.contains(b.time); });
    } else if (decl.role == ExternalRole::Egress) {
      log("output-persisted " + p + " " + monitor_.handle_io_watermark(p).outputs_persisted.to_string());
    }
  }

  void inject_failure() {
    std::set<std::string> failed;
    for (const auto& p : failures_[next_failure_++].processors) {
      if (!failed.insert(p).second) continue;
      log("fail " + p);
      procs_.at(p).fail();
      stores_.at(p).drop_unpersisted();
      std::erase_if(acks_, [&](const PendingAck& a) { return a.processor == p; });
      // Messages already handed to the network by p stay in flight.
      for (auto& ch : channels_) {
        if (ch.dst == p) ch.queue.clear();
      }
    }
    recover(failed);
  }

  /// Pauses everything, chooses frontiers from persisted records plus live
  /// state, resets processors and channels, then resumes.
  void recover(const std::set<std::string>& failed) {
    const auto& g = sc_.graph;
    std::map<std::string, CheckpointStore> chains;
    RecoveryReport rep;
    rep.snapshot.graph = g;
    for (const auto& d : g.processors()) {
      auto chain = stores_.at(d.id);
      chain.drop_unpersisted();
      const auto& proc = procs_.at(d.id);
      if (!failed.count(d.id)) chain.put_live(live_record(g, proc));
      auto& ps = rep.snapshot.processors[d.id];
      ps.failed = failed.count(d.id) > 0;
      for (const auto& r : chain.records()) ps.checkpoints.push_back(r.meta);
      chains.emplace(d.id, std::move(chain));
    }
    auto chosen = choose_frontiers(rep.snapshot);
    rep.assignment = chosen.assignment;
    rep.iterations = chosen.iterations;
    const auto& a = rep.assignment;
    for (const auto& v : check_consistent(rep.snapshot, a)) rep.violations.push_back(v.to_string());
    log("recover iterations=" + std::to_string(chosen.iterations));

    std::map<std::string, ResetPlan> plans;
    for (const auto& d : g.processors()) plans.emplace(d.id, reset_state(g, d.id, a, chains.at(d.id)));
    auto untouched = [&](const std::string& p) { return !failed.count(p) && a.f.at(p).is_top(); };

    for (const auto& d : g.processors()) {
      if (untouched(d.id)) continue;
      const auto& f = a.f.at(d.id);
      log("rollback " + d.id + " " + f.to_string());
      auto& proc = procs_.at(d.id);
      const auto& plan = plans.at(d.id);
      proc.restore(ProcessorState::decode(d.domain, plan.state), plan.history, chains.at(d.id).at(f).sent);
      proc.recover();
      stores_.at(d.id).truncate_to(f);
      monitor_.truncate(d.id, f);
      std::erase_if(acks_, [&](const PendingAck& x) { return x.processor == d.id && !x.f.subset_of(f); });
      last_completed_.at(d.id) = f;
      advances_.at(d.id) = 0;
    }

    for (auto& ch : channels_) {
      const auto& dst = ch.dst;
      if (untouched(dst)) {
        if (!ch.src.empty()) {
          const auto& fs = a.f.at(ch.src);
          std::erase_if(ch.queue, [&](const Queued& q) { return !fs.contains(q.msg.origin); });
        }
        continue;
      }
      ch.queue.clear();
      if (ch.src.empty()) {
        std::size_t n = 0;
        for (const auto& b : retained_[dst]) {
          if (a.f.at(dst).contains(b.time)) continue;
          offer(dst, b);
          ++n;
        }
        if (n > 0) log("resend input " + dst + " batches=" + std::to_string(n));
        continue;
      }
      const auto& q = plans.at(ch.src).resend.at(ch.key);
      for (const auto& m : q) enqueue(ch.key, m);
      if (!q.empty()) log("resend " + ch.key + " messages=" + std::to_string(q.size()));
    }

    // No channel may hold a message its restored destination already has.
    for (const auto& ch : channels_) {
      if (untouched(ch.dst)) continue;
      for (const auto& q : ch.queue) {
        if (a.f.at(ch.dst).contains(q.msg.time)) {
          rep.violations.push_back("C1 channel " + ch.key + " holds " + show(ch.dst, q.msg.time) +
                                   " inside the frontier of " + ch.dst);
        }
      }
    }
    for (const auto& v : rep.violations) log("violation " + v);
    trace_.recoveries.push_back(std::move(rep));
    log("resume");
    update_checkpoints();
  }

  Scenario sc_;
  std::mt19937_64 rng_;
  std::int64_t limit_;
  Monitor monitor_;
  std::map<std::string, Processor> procs_;
  std::map<std::string, CheckpointStore> stores_;
  std::vector<Channel> channels_;
  std::map<std::string, std::size_t> channel_index_;
  std::map<std::string, std::vector<InputBatch>> retained_;
  std::map<std::string, Frontier> last_completed_;
  std::map<std::string, std::int64_t> advances_;
  std::vector<PendingAck> acks_;
  std::vector<FailureSpec> failures_;
  std::size_t next_failure_ = 0;
  std::int64_t step_ = 0;
  std::uint64_t next_order_ = 0;
  Trace trace_;
};

inline Trace run(const Scenario& sc) { return Simulation(sc).run(); }

}  // namespace dfr
