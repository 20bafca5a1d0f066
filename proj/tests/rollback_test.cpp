#include <dfr/rollback.hpp>

#include <gtest/gtest.h>

#include "figure_snapshots.hpp"
#include "snapshot_gen.hpp"

namespace dfr {
namespace {

using testing::epoch_upto;
using testing::loop_upto;

Assignment uniform(const Snapshot& s, const std::map<std::string, Frontier>& f) {
  Assignment a;
  a.f = f;
  a.fn = f;
  (void)s;
  return a;
}

Assignment all_empty(const Snapshot& s) {
  Assignment a;
  for (const auto& d : s.graph.processors()) {
    a.f[d.id] = Frontier::empty(d.domain);
    a.fn[d.id] = Frontier::empty(d.domain);
  }
  return a;
}

TEST(Check, Fig5AssignmentViolatesNotificationConstraint) {
  auto s = testing::fig5_snapshot();
  const auto one = epoch_upto(1);
  auto a = uniform(s, {{"p", Frontier::empty(TimeDomain::epochs())}, {"q", one}, {"r", one}, {"x", one}});
  auto v = check_consistent(s, a);
  ASSERT_FALSE(v.empty());
  for (const auto& x : v) EXPECT_EQ(x.constraint.substr(0, 2), "C4") << x.to_string();
  // Lowering the notification frontiers moves the violation to x.
  a.fn["r"] = a.fn["x"] = Frontier::empty(TimeDomain::epochs());
  v = check_consistent(s, a);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].constraint, "C4b");
  EXPECT_EQ(v[0].processor, "x");
  EXPECT_EQ(v[0].lhs, one);
}

TEST(Check, AllEmptyIsConsistent) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    auto s = testing::random_snapshot(rng);
    EXPECT_TRUE(check_consistent(s, all_empty(s)).empty());
  }
}

TEST(Check, FrontierOutsideChainThrows) {
  auto s = testing::fig5_snapshot();
  auto a = all_empty(s);
  a.f["p"] = epoch_upto(3);
  EXPECT_THROW(check_consistent(s, a), Error);
}

TEST(Check, Fig6cPublishedAssignment) {
  auto s = testing::fig6c_snapshot();
  const auto d = TimeDomain::epochs();
  auto a = uniform(s, {{"in", Frontier::top(d)},
                       {"p", Frontier::top(d)},
                       {"q", loop_upto(1, 4)},
                       {"y", loop_upto(1, 3)},
                       {"out", Frontier::top(d)}});
  // Leaving the loop at epoch 1 is not yet fixed by q.
  a.fn["out"] = epoch_upto(0);
  for (const auto& v : check_consistent(s, a)) ADD_FAILURE() << v.to_string();
}

TEST(Choose, Fig5NeverKeepsXNotified) {
  auto s = testing::fig5_snapshot();
  auto r = choose_frontiers(s);
  EXPECT_TRUE(check_consistent(s, r.assignment).empty());
  EXPECT_TRUE(r.assignment.f.at("p").is_empty());
  EXPECT_TRUE(r.assignment.f.at("x").is_empty());
  EXPECT_EQ(r.assignment.f.at("q"), epoch_upto(1));
}

TEST(Choose, Fig6b) {
  auto s = testing::fig6b_snapshot();
  auto r = choose_frontiers(s);
  const auto& f = r.assignment.f;
  EXPECT_TRUE(f.at("x").is_empty());
  EXPECT_TRUE(f.at("y").is_empty());
  EXPECT_TRUE(f.at("p").is_top());
  EXPECT_TRUE(f.at("q").is_top());
  EXPECT_TRUE(f.at("r").is_top());
}

TEST(Choose, Fig6c) {
  auto s = testing::fig6c_snapshot();
  auto r = choose_frontiers(s);
  EXPECT_EQ(r.assignment.f.at("y"), loop_upto(1, 3));
  EXPECT_EQ(r.assignment.f.at("q"), loop_upto(1, 4));
  EXPECT_TRUE(r.assignment.f.at("p").is_top());
  EXPECT_TRUE(check_consistent(s, r.assignment).empty());
}

TEST(Choose, LiveTopEverywhereStays) {
  auto s = testing::fig6b_snapshot();
  s.processors["y"].checkpoints.push_back(testing::meta(s.graph, "y", Frontier::top(TimeDomain::epochs()), nullptr,
                                                        {{"e3", epoch_upto(1)}}));
  s.processors["y"].failed = false;
  auto r = choose_frontiers(s);
  for (const auto& [p, f] : r.assignment.f) EXPECT_TRUE(f.is_top()) << p;
  EXPECT_EQ(r.iterations, 0);
}

TEST(Choose, SingleIsolatedProcessorKeepsMax) {
  Snapshot s;
  s.graph = GraphSpec({testing::decl("a", TimeDomain::epochs())}, {});
  s.processors["a"].checkpoints = {testing::meta(s.graph, "a", Frontier::empty(TimeDomain::epochs())),
                                   testing::meta(s.graph, "a", epoch_upto(4))};
  EXPECT_EQ(choose_frontiers(s).assignment.f.at("a"), epoch_upto(4));
  auto oracle = brute_force_oracle(s);
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_EQ(oracle[0].f.at("a"), epoch_upto(4));
}

TEST(Oracle, TwoProcessorChain) {
  Snapshot s;
  const auto d = TimeDomain::epochs();
  s.graph = GraphSpec({testing::decl("a", d), testing::decl("b", d)}, {testing::link("e", "a", "b")});
  const auto one = epoch_upto(1);
  s.processors["a"].checkpoints = {testing::meta(s.graph, "a", Frontier::empty(d)),
                                   testing::meta(s.graph, "a", one, nullptr, {}, {{"e", one}})};
  s.processors["b"].checkpoints = {testing::meta(s.graph, "b", Frontier::empty(d)),
                                   testing::meta(s.graph, "b", one, nullptr, {{"e", one}})};
  auto oracle = brute_force_oracle(s);
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_EQ(oracle[0].f.at("a"), one);
  EXPECT_EQ(oracle[0].f.at("b"), one);
  EXPECT_EQ(choose_frontiers(s).assignment, oracle[0]);
}

TEST(Oracle, Fig5MaximaRollXBack) {
  auto s = testing::fig5_snapshot();
  for (const auto& a : brute_force_oracle(s)) EXPECT_TRUE(a.f.at("x").is_empty());
}

TEST(Oracle, BoundExceeded) {
  std::mt19937_64 rng(4);
  auto s = testing::random_snapshot(rng);
  EXPECT_THROW(brute_force_oracle(s, 0), Error);
}

TEST(Oracle, RandomSnapshotsAgree) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 150; ++i) {
    testing::SnapshotOptions opt;
    opt.totally_ordered = i % 2 == 0;
    opt.notes = static_cast<testing::SnapshotOptions::Notes>(i % 3);
    auto s = testing::random_snapshot(rng, opt);
    auto r = choose_frontiers(s);
    auto v = check_consistent(s, r.assignment);
    ASSERT_TRUE(v.empty()) << v[0].to_string();
    auto oracle = brute_force_oracle(s);
    ASSERT_EQ(oracle.size(), 1u) << "snapshot " << i;
    EXPECT_EQ(r.assignment, oracle[0]) << "snapshot " << i << "\n" << r.assignment.to_string() << "vs\n"
                                       << oracle[0].to_string();
  }
}

TEST(Choose, AddingCheckpointsNeverLowersResult) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    testing::SnapshotOptions opt;
    opt.totally_ordered = true;
    auto full = testing::random_snapshot(rng, opt);
    auto fewer = full;
    for (auto& [p, ps] : fewer.processors) {
      if (ps.checkpoints.size() > 2) ps.checkpoints.erase(ps.checkpoints.begin() + 1);
    }
    auto big = choose_frontiers(full).assignment;
    auto small = choose_frontiers(fewer).assignment;
    EXPECT_TRUE(small.below(big)) << i;
  }
}

TEST(Reset, Fig6cResendsLoggedMessages) {
  GraphSpec g = testing::fig6c_snapshot().graph;
  auto decls = g.processors();
  for (auto& d : decls) {
    if (d.id == "q") {
      d.policy = PolicySpec{PolicyKind::LogSentMessages, 1, false};
      d.behavior.max_iterations = 10;
    }
  }
  g = GraphSpec(decls, g.edges());
  Processor q(g, "q");
  for (std::int64_t c = 0; c <= 4; ++c) q.deliver(Event::message(c == 0 ? "e2" : "e5", LogicalTime::tuple(1, {c}), 10 + c));
  CheckpointStore store(g, "q");
  auto rec = take_checkpoint(g, q, loop_upto(1, 4), loop_upto(1, 4), Frontier::empty(q.domain()));
  store.append(rec);
  store.ack(loop_upto(1, 4));
  Assignment a;
  for (const auto& d : g.processors()) a.f[d.id] = a.fn[d.id] = Frontier::top(d.domain);
  a.f["q"] = a.fn["q"] = loop_upto(1, 4);
  a.f["y"] = a.fn["y"] = loop_upto(1, 3);
  auto plan = reset_state(g, "q", a, store);
  ASSERT_EQ(plan.resend.at("e4").size(), 1u);
  EXPECT_EQ(plan.resend.at("e4")[0].time, LogicalTime::tuple(1, {4}));
  EXPECT_EQ(plan.history.size(), 5u);
  EXPECT_EQ(plan.frontiers.size(), 2u);
}

TEST(Reset, TopWithDownstreamAtTopResendsNothing) {
  auto s = testing::fig6b_snapshot();
  Processor p(s.graph, "p");
  p.deliver(Event::message("e1", LogicalTime::epoch(0), 1));
  CheckpointStore store(s.graph, "p");
  store.append(live_record(s.graph, p));
  Assignment a;
  for (const auto& d : s.graph.processors()) a.f[d.id] = a.fn[d.id] = Frontier::top(d.domain);
  auto plan = reset_state(s.graph, "p", a, store);
  for (const auto& [e, q] : plan.resend) EXPECT_TRUE(q.empty());
  EXPECT_EQ(plan.history, p.history());
}

TEST(Reset, EmptyFrontierHasEmptyLog) {
  auto s = testing::fig6b_snapshot();
  CheckpointStore store(s.graph, "p");
  auto a = all_empty(s);
  auto plan = reset_state(s.graph, "p", a, store);
  for (const auto& [e, q] : plan.resend) EXPECT_TRUE(q.empty());
  EXPECT_TRUE(plan.history.empty());
  EXPECT_EQ(plan.state, "");
}

TEST(Reset, MissingRecordIsFatal) {
  auto s = testing::fig6b_snapshot();
  CheckpointStore store(s.graph, "p");
  auto a = all_empty(s);
  a.f["p"] = epoch_upto(2);
  EXPECT_THROW(reset_state(s.graph, "p", a, store), Error);
}

}  // namespace
}  // namespace dfr
