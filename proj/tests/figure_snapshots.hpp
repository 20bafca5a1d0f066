// Hand-built snapshots for the rollback figures.
#pragma once

#include <dfr/rollback.hpp>

namespace dfr::testing {

inline ProcessorDecl decl(std::string id, TimeDomain d, BehaviorKind b = BehaviorKind::StatelessRelay,
                          ExternalRole role = ExternalRole::None) {
  ProcessorDecl p;
  p.id = std::move(id);
  p.domain = std::move(d);
  p.behavior.kind = b;
  p.role = role;
  return p;
}

inline EdgeDecl link(std::string id, std::string s, std::string d, ProjectionKind k = ProjectionKind::Identity) {
  return EdgeDecl{std::move(id), std::move(s), std::move(d), ProjectionSpec{k, 1}};
}

/// Metadata with static projections; unspecified estimates are EMPTY.
inline CheckpointMetadata meta(const GraphSpec& g, const std::string& p, const Frontier& f, const Frontier* nbar = nullptr,
                               std::map<std::string, Frontier> mbar = {}, std::map<std::string, Frontier> dbar = {}) {
  const auto& d = g.processor(p).domain;
  CheckpointMetadata m;
  m.processor = p;
  m.f = f;
  m.nbar = nbar ? *nbar : Frontier::empty(d);
  for (const auto& e : g.in_edges(p)) m.mbar.emplace(e, mbar.count(e) ? mbar.at(e) : Frontier::empty(d));
  for (const auto& e : g.out_edges(p)) {
    m.phi.emplace(e, apply_projection(g, e, f));
    m.dbar.emplace(e, dbar.count(e) ? dbar.at(e) : Frontier::empty(g.dst_domain(e)));
  }
  return m;
}

inline Frontier epoch_upto(std::int64_t e) {
  return Frontier::down_close(TimeDomain::epochs(), {LogicalTime::epoch(e)});
}

inline Frontier loop_upto(std::int64_t e, std::int64_t c) {
  return Frontier::down_close(TimeDomain::structured(1), {LogicalTime::tuple(e, {c})});
}

/// p and q were notified at 1; q sent on e1 to r, p sent nothing on e2; x was
/// notified at 1. p lost everything.
inline Snapshot fig5_snapshot() {
  const auto d = TimeDomain::epochs();
  Snapshot s;
  s.graph = GraphSpec({decl("p", d), decl("q", d), decl("r", d), decl("x", d)},
                      {link("e1", "q", "r"), link("e2", "p", "r"), link("e3", "r", "x")});
  const auto& g = s.graph;
  const auto one = epoch_upto(1);
  const auto none = Frontier::empty(d);
  s.processors["p"].checkpoints = {meta(g, "p", none)};
  s.processors["p"].failed = true;
  s.processors["q"].checkpoints = {meta(g, "q", none), meta(g, "q", one, &one, {}, {{"e1", one}})};
  s.processors["r"].checkpoints = {meta(g, "r", none), meta(g, "r", one, nullptr, {{"e1", one}})};
  s.processors["x"].checkpoints = {meta(g, "x", none), meta(g, "x", one, &one)};
  return s;
}

/// Spark-like epochs: p logs its outputs, y failed.
inline Snapshot fig6b_snapshot() {
  const auto d = TimeDomain::epochs();
  Snapshot s;
  s.graph = GraphSpec({decl("in", d, BehaviorKind::IngressSource, ExternalRole::Ingress), decl("q", d), decl("p", d),
                       decl("x", d), decl("y", d, BehaviorKind::Buffer), decl("r", d)},
                      {link("e0", "in", "q"), link("e1", "q", "p"), link("e2", "p", "x"), link("e3", "x", "y"),
                       link("e4", "p", "r")});
  const auto& g = s.graph;
  const auto top = Frontier::top(d);
  const auto none = Frontier::empty(d);
  const auto sent = epoch_upto(1);
  s.processors["in"].checkpoints = {meta(g, "in", none), meta(g, "in", top, nullptr, {}, {{"e0", sent}})};
  s.processors["q"].checkpoints = {meta(g, "q", none),
                                   meta(g, "q", top, nullptr, {{"e0", sent}}, {{"e1", sent}})};
  s.processors["p"].checkpoints = {meta(g, "p", none), meta(g, "p", top, nullptr, {{"e1", sent}})};
  s.processors["x"].checkpoints = {meta(g, "x", none),
                                   meta(g, "x", epoch_upto(0), nullptr, {{"e2", epoch_upto(0)}}, {{"e3", epoch_upto(0)}}),
                                   meta(g, "x", top, nullptr, {{"e2", sent}}, {{"e3", sent}})};
  s.processors["y"].checkpoints = {meta(g, "y", none)};
  s.processors["y"].failed = true;
  s.processors["r"].checkpoints = {meta(g, "r", none), meta(g, "r", top, nullptr, {{"e4", sent}})};
  return s;
}

/// Loop with q logging sent messages and y (a Sum) failed after its
/// checkpoint at (1,3).
inline Snapshot fig6c_snapshot() {
  const auto d = TimeDomain::epochs();
  const auto loop = TimeDomain::structured(1);
  Snapshot s;
  s.graph = GraphSpec(
      {decl("in", d, BehaviorKind::IngressSource, ExternalRole::Ingress), decl("p", d),
       decl("q", loop, BehaviorKind::LoopEgressIncrement), decl("y", loop, BehaviorKind::Sum),
       decl("out", d, BehaviorKind::EgressSink, ExternalRole::Egress)},
      {link("e1", "in", "p"), link("e2", "p", "q", ProjectionKind::LoopIngress), link("e4", "q", "y"),
       link("e5", "y", "q", ProjectionKind::Feedback), link("e3", "q", "out", ProjectionKind::LoopEgress)});
  const auto& g = s.graph;
  const auto top_e = Frontier::top(d);
  const auto top_l = Frontier::top(loop);
  const auto e1 = epoch_upto(1);
  s.processors["in"].checkpoints = {meta(g, "in", Frontier::empty(d)), meta(g, "in", top_e, nullptr, {}, {{"e1", e1}})};
  s.processors["p"].checkpoints = {meta(g, "p", Frontier::empty(d)),
                                   meta(g, "p", top_e, nullptr, {{"e1", e1}}, {{"e2", loop_upto(1, 0)}})};
  s.processors["q"].checkpoints = {
      meta(g, "q", Frontier::empty(loop)),
      meta(g, "q", loop_upto(1, 2), nullptr, {{"e2", loop_upto(1, 0)}, {"e5", loop_upto(1, 2)}}),
      meta(g, "q", loop_upto(1, 4), nullptr, {{"e2", loop_upto(1, 0)}, {"e5", loop_upto(1, 4)}}),
      meta(g, "q", top_l, nullptr, {{"e2", loop_upto(1, 0)}, {"e5", loop_upto(1, 6)}})};
  const auto y13 = loop_upto(1, 3);
  s.processors["y"].checkpoints = {meta(g, "y", Frontier::empty(loop)),
                                   meta(g, "y", y13, &y13, {{"e4", y13}}, {{"e5", loop_upto(1, 4)}})};
  s.processors["y"].failed = true;
  s.processors["out"].checkpoints = {meta(g, "out", Frontier::empty(d)), meta(g, "out", top_e)};
  return s;
}

}  // namespace dfr::testing
