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

#include <dfr/rollback.hpp>

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dfr {

struct WatermarkAdvance {
  std::string processor;
  Frontier watermark;

  friend bool operator==(const WatermarkAdvance&, const WatermarkAdvance&) = default;
};

/// Garbage collection permitted by a watermark.
struct GcActions {
  std::string processor;
  Frontier watermark;
  /// Upstream logs on these edges may drop messages with times in `watermark`.
  std::vector<std::string> trim_edges;
};

/// External effects permitted by an ingress or egress watermark.
struct IoActions {
  std::string processor;
  /// Ingress: input batches at these times may be acknowledged.
  Frontier ack_inputs;
  /// Egress: outputs released at these times are persisted downstream.
  Frontier outputs_persisted;
};

/// Tracks persisted checkpoint metadata and the low-watermark frontiers
/// below which no processor will ever roll back.
class Monitor {
 public:
  enum class Mode { Recompute, Incremental };

  Monitor() = default;
  explicit Monitor(GraphSpec g, Mode mode = Mode::Recompute) : graph_(std::move(g)), mode_(mode) {
    for (const auto& d : graph_.processors()) {
      auto rec = empty_record(graph_, d.id);
      snap_.processors[d.id].checkpoints = {rec.meta};
      marks_[d.id] = rec.meta.f;
    }
    snap_.graph = graph_;
  }

  const GraphSpec& graph() const noexcept { return graph_; }
  const Frontier& watermark(const std::string& p) const { return marks_.at(p); }
  const std::map<std::string, Frontier>& watermarks() const noexcept { return marks_; }
  /// Persisted-only view used for watermark computation.
  const Snapshot& snapshot() const noexcept { return snap_; }
  const std::vector<std::string>& rejected() const noexcept { return rejected_; }

  /// Adds persisted metadata; returns the watermarks that grew.
  std::vector<WatermarkAdvance> ingest(const CheckpointMetadata& m) {
    if (auto v = m.violations(); !v.empty()) {
      rejected_.push_back(v.front());
      return {};
    }
    auto& chain = snap_.processors.at(m.processor).checkpoints;
    std::size_t pos = 0;
    for (; pos < chain.size(); ++pos) {
      if (chain[pos].f == m.f) return {};
      if (!chain[pos].f.strict_subset_of(m.f)) break;
    }
    if (pos < chain.size() && !m.f.strict_subset_of(chain[pos].f)) {
      rejected_.push_back(m.processor + " at " + m.f.to_string() + ": not comparable with its frontier chain");
      return {};
    }
    if (pos > 0 && !chain[pos - 1].f.strict_subset_of(m.f)) {
      rejected_.push_back(m.processor + " at " + m.f.to_string() + ": not comparable with its frontier chain");
      return {};
    }
    // Entries below the current watermark are never needed again.
    if (!chain.empty() && m.f.strict_subset_of(marks_.at(m.processor))) return {};
    chain.insert(chain.begin() + static_cast<std::ptrdiff_t>(pos), m);
    return recompute(m.processor);
  }

  /// Records of p strictly below watermark f may go; f must be current.
  GcActions authorize_gc(const std::string& p, const Frontier& f) {
    if (f != marks_.at(p)) throw Error("authorize_gc for '" + p + "' at " + f.to_string() + " which is not its watermark");
    GcActions act{p, f, graph_.in_edges(p)};
    auto& chain = snap_.processors.at(p).checkpoints;
    std::erase_if(chain, [&](const CheckpointMetadata& m) {
      return !m.f.is_empty() && m.f.strict_subset_of(act.watermark);
    });
    return act;
  }

  IoActions handle_io_watermark(const std::string& p) const {
    const auto& decl = graph_.processor(p);
    const auto none = Frontier::empty(decl.domain);
    if (decl.role == ExternalRole::Ingress) return {p, marks_.at(p), none};
    if (decl.role == ExternalRole::Egress) return {p, none, marks_.at(p)};
    throw Error("processor '" + p + "' is neither ingress nor egress");
  }

  /// After a rollback of p to f: entries outside f are no longer valid.
  void truncate(const std::string& p, const Frontier& f) {
    auto& chain = snap_.processors.at(p).checkpoints;
    std::erase_if(chain, [&](const CheckpointMetadata& m) { return !m.f.subset_of(f); });
    if (!marks_.at(p).subset_of(f)) throw Error("rollback of '" + p + "' went below its watermark");
  }

 private:
  std::vector<WatermarkAdvance> recompute(const std::string& changed) {
    std::map<std::string, Frontier> next;
    if (mode_ == Mode::Recompute) {
      next = choose_frontiers(snap_).assignment.f;
    } else {
      // Only the weakly connected component of the changed processor can move.
      auto comp = component(changed);
      std::vector<ProcessorDecl> decls;
      std::vector<EdgeDecl> edges;
      for (const auto& d : graph_.processors()) {
        if (comp.count(d.id)) decls.push_back(d);
      }
      for (const auto& e : graph_.edges()) {
        if (comp.count(e.src)) edges.push_back(e);
      }
      Snapshot sub;
      sub.graph = GraphSpec(decls, edges);
      for (const auto& p : comp) sub.processors.emplace(p, snap_.processors.at(p));
      next = marks_;
      for (auto& [p, f] : choose_frontiers(sub).assignment.f) next[p] = f;
    }
    std::vector<WatermarkAdvance> out;
    for (const auto& d : graph_.processors()) {
      auto& cur = marks_.at(d.id);
      const auto& nf = next.at(d.id);
      if (cur.strict_subset_of(nf)) out.push_back({d.id, nf});
      // Watermarks never move down; a lower result would mean the
      // metadata is not monotone and the old watermark stays.
      if (cur.subset_of(nf)) cur = nf;
    }
    return out;
  }

  std::set<std::string> component(const std::string& p) const {
    std::set<std::string> seen{p};
    std::vector<std::string> stack{p};
    while (!stack.empty()) {
      auto cur = stack.back();
      stack.pop_back();
      auto visit = [&](const std::string& q) {
        if (seen.insert(q).second) stack.push_back(q);
      };
      for (const auto& e : graph_.out_edges(cur)) visit(graph_.edge(e).dst);
      for (const auto& e : graph_.in_edges(cur)) visit(graph_.edge(e).src);
    }
    return seen;
  }

  GraphSpec graph_;
  Mode mode_ = Mode::Recompute;
  Snapshot snap_;
  std::map<std::string, Frontier> marks_;
  std::vector<std::string> rejected_;
};

}  // namespace dfr
